"use strict";

const COLORS = {
  COLOR1: "#d62728", COLOR2: "#2ca02c", COLOR3: "#1f77b4", COLOR4: "#f5d328",
  COLOR5: "#9467bd", COLOR6: "#e377c2", COLOR7: "#ff7f0e", COLOR8: "#111111",
};

const app = document.getElementById("app");
let sessionId = null;

async function api(method, path, body) {
  const res = await fetch(path, {
    method,
    headers: body ? { "Content-Type": "application/json" } : {},
    body: body ? JSON.stringify(body) : undefined,
  });
  const data = await res.json();
  if (!res.ok) throw new Error(data.error ? data.error.message : res.statusText);
  return data;
}

function el(tag, attrs = {}, ...children) {
  const e = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "onclick") e.onclick = v;
    else e.setAttribute(k, v);
  }
  for (const c of children) e.append(c);
  return e;
}

function seq(symbols) {
  const box = el("span", { class: "seq" });
  for (const s of symbols) box.append(el("span", { class: "dot", style: `background:${COLORS[s]}` }));
  return box;
}

// Click pool circles to build a response; returns {node, value()}.
function responder(pool) {
  const chosen = [];
  const view = seq([]);
  const redraw = () => { view.innerHTML = ""; };
  const poolBox = el("div", { class: "pool" });
  for (const s of pool) {
    poolBox.append(el("button", {
      style: `background:${COLORS[s]}`, title: s,
      onclick: () => { chosen.push(s); view.append(el("span", { class: "dot", style: `background:${COLORS[s]}` })); },
    }));
  }
  const reset = el("button", { onclick: () => { chosen.length = 0; redraw(); } }, "Reset");
  return { node: el("div", {}, view, poolBox, reset), value: () => chosen.slice() };
}

function referenceTable(refs) {
  const t = el("table", { class: "ref" });
  for (const r of refs) {
    const out = r.output === null ? el("span", { class: "covered" }, "?") : seq(r.output);
    t.append(el("tr", {}, el("td", {}, r.instruction), el("td", {}, out)));
  }
  return t;
}

async function submit(itemId, symbols) {
  if (symbols.length === 0) return null;
  return api("POST", `/api/session/${sessionId}/response`, { item_id: itemId, symbols });
}

async function render(step) {
  app.innerHTML = "";
  if (step.status === "done") return renderDone(step);
  if (step.phase === "instructions") {
    app.append(el("h2", {}, "Practice"),
      el("p", {}, "Copy the example below using the colored circles."),
      el("p", {}, step.item.instruction, " ", seq(step.item.demonstration)));
  } else {
    app.append(el("h2", {}, `Part ${step.stage.index + 1} of ${step.stage.count}`));
    if (step.reference.length) app.append(referenceTable(step.reference));
  }
  if (step.page && step.phase === "test") return renderPage(step);
  const r = responder(step.item.pool);
  const fb = el("p", { class: "feedback" });
  app.append(el("div", { class: "item" }, el("p", {}, el("strong", {}, step.item.instruction)), r.node),
    el("button", {
      onclick: async () => {
        const ack = await submit(step.item.id, r.value());
        if (!ack) return;
        if (ack.feedback) {
          fb.className = "feedback " + (ack.feedback.correct ? "ok" : "bad");
          fb.textContent = ack.feedback.correct ? "Correct" : "Incorrect";
          await new Promise((ok) => setTimeout(ok, 800));
        }
        render(await api("GET", `/api/session/${sessionId}/next`));
      },
    }, "Submit"), fb);
}

// Free-form page: all items answered on one screen, submitted in order.
function renderPage(step) {
  const start = step.page.findIndex((it) => it.id === step.item.id);
  const rows = step.page.slice(start).map((it) => ({ it, r: responder(it.pool) }));
  for (const { it, r } of rows) app.append(el("div", { class: "item" }, el("p", {}, el("strong", {}, it.instruction)), r.node));
  app.append(el("button", {
    onclick: async () => {
      if (rows.some(({ r }) => r.value().length === 0)) return alert("Please answer every item.");
      for (const { it, r } of rows) await submit(it.id, r.value());
      render(await api("GET", `/api/session/${sessionId}/next`));
    },
  }, "Submit all"));
}

function renderDone(step) {
  app.append(el("h2", {}, "Thank you"));
  if (step.survey.asked) {
    const yes = el("button", { onclick: () => answer(true) }, "Yes");
    const no = el("button", { onclick: () => answer(false) }, "No");
    const answer = async (aid) => {
      await api("POST", `/api/session/${sessionId}/survey`, { external_aid: aid });
      app.innerHTML = "<h2>Thank you</h2><p>Your responses were recorded.</p>";
    };
    app.append(el("p", {}, "Did you use pen and paper or any other aid?"), yes, no);
  } else {
    app.append(el("p", {}, "Your responses were recorded."));
  }
}

async function main() {
  const params = new URLSearchParams(location.search);
  sessionId = params.get("session") || sessionStorage.getItem("fewshot-session");
  let step;
  if (sessionId) {
    try { step = await api("GET", `/api/session/${sessionId}/next`); } catch { sessionId = null; }
  }
  if (!sessionId) {
    const created = await api("POST", "/api/session", params.get("kind") ? { kind: params.get("kind") } : {});
    sessionId = created.session_id;
    step = created.next;
  }
  sessionStorage.setItem("fewshot-session", sessionId);
  render(step);
}

main().catch((e) => { app.textContent = "Error: " + e.message; });
