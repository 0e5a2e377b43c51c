// DOM wiring. All state that matters lives on the server; this file
// renders the latest payloads and translates clicks and keys into them.

import { ApiClient, ApiError } from "./api.js";
import type { CurvePoint, SessionInfo } from "./api.js";
import { buildCards, formatEntropy, formatMi } from "./model.js";
import type { Card } from "./model.js";
import { BatchDraft, classForKey } from "./keyboard.js";

const client = new ApiClient("");

let session: SessionInfo | null = null;
let cards: Card[] = [];
let draft = new BatchDraft([]);
let busy = false;
let finished = false;

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function el(
  tag: string,
  className?: string,
  text?: string,
): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function banner(message: string | null, kind: "error" | "info" = "error") {
  const box = byId<HTMLDivElement>("banner");
  if (message === null) {
    box.hidden = true;
    return;
  }
  box.hidden = false;
  box.className = kind;
  box.textContent = message;
}

function renderStatus() {
  if (!session) return;
  byId("status").textContent =
    `round ${session.round} · seen ${session.seen}/${session.total}` +
    ` · strong ${session.strong_labels} · weak ${session.weak_labels}` +
    ` · ${session.strategy}/${session.mode}`;
}

function renderProgress() {
  byId("progress").textContent = cards.length
    ? `${draft.assignedCount}/${cards.length} labeled`
    : "";
  const submit = byId<HTMLButtonElement>("submit");
  submit.disabled = busy || !draft.complete;
  byId<HTMLButtonElement>("abort").disabled = busy || cards.length === 0;
}

function renderCardSelection() {
  for (const node of document.querySelectorAll<HTMLElement>(".card")) {
    const id = node.dataset["id"];
    if (!id) continue;
    node.classList.toggle("focus", draft.focused === id);
    const chosen = draft.labelOf(id);
    node.classList.toggle("done", chosen !== undefined);
    for (const btn of node.querySelectorAll<HTMLButtonElement>(".cls")) {
      btn.classList.toggle(
        "selected",
        chosen !== undefined && Number(btn.dataset["cls"]) === chosen,
      );
    }
  }
  renderProgress();
}

function cardNode(card: Card, classCount: number): HTMLElement {
  const root = el("div", "card");
  root.dataset["id"] = card.id;

  const head = el("div", "card-head");
  head.append(el("span", "card-id", card.id));
  head.append(el("span", "entropy", `H ${formatEntropy(card.entropy)}`));
  root.append(head);

  const bars = el("div", "bars");
  card.percentages.forEach((pct, cls) => {
    const row = el("div", "bar-row");
    row.append(el("span", "bar-cls", String(cls)));
    const track = el("div", "bar-track");
    const fill = el("div", cls === card.argmax ? "bar-fill argmax" : "bar-fill");
    fill.style.width = `${pct}%`;
    track.append(fill);
    row.append(track);
    row.append(el("span", "bar-pct", `${pct}%`));
    bars.append(row);
  });
  root.append(bars);

  const picks = el("div", "picks");
  for (let cls = 0; cls < classCount; cls++) {
    const btn = el("button", "cls", String(cls)) as HTMLButtonElement;
    btn.dataset["cls"] = String(cls);
    btn.title = `key ${cls === 9 ? 0 : cls + 1}`;
    btn.addEventListener("click", () => {
      draft.focusOn(card.id);
      draft.assign(cls);
      renderCardSelection();
    });
    picks.append(btn);
  }
  root.append(picks);

  if (card.neighbors.length) {
    const text = card.neighbors
      .map((n) => `${n.id} (${formatMi(n.mi)})`)
      .join(" · ");
    root.append(el("div", "neighbors", `linked: ${text}`));
  }

  root.addEventListener("click", () => {
    draft.focusOn(card.id);
    renderCardSelection();
  });
  return root;
}

function renderCards() {
  const box = byId("cards");
  box.replaceChildren();
  if (finished) {
    const idle = el("div", "idle");
    idle.append(el("h2", undefined, "stream fully consumed"));
    if (session) {
      idle.append(
        el(
          "p",
          undefined,
          `${session.strong_labels} manual and ${session.weak_labels}` +
            ` self labels over ${session.round} rounds`,
        ),
      );
    }
    box.append(idle);
    renderProgress();
    return;
  }
  if (cards.length === 0) {
    const idle = el("div", "idle");
    idle.append(el("h2", undefined, "no queries this round"));
    idle.append(
      el("p", undefined, "the budget is zero; advance to keep streaming"),
    );
    const next = el("button", "primary", "advance round") as HTMLButtonElement;
    next.addEventListener("click", () => void submit());
    idle.append(next);
    box.append(idle);
    renderProgress();
    return;
  }
  const classCount = session?.class_count ?? 0;
  for (const card of cards) box.append(cardNode(card, classCount));
  renderCardSelection();
}

function renderLastRound(entropies: Record<string, number>, ids: string[]) {
  const box = byId("lastround");
  box.replaceChildren();
  if (ids.length === 0) return;
  box.append(el("h3", undefined, "last round"));
  const list = el("div", "chips");
  for (const id of ids) {
    const h = entropies[id];
    list.append(
      el("span", "chip", `${id} H ${formatEntropy(h ?? 0)}`),
    );
  }
  box.append(list);
}

function renderCurve(points: CurvePoint[]) {
  const svg = byId<HTMLElement>("curve") as unknown as SVGSVGElement;
  while (svg.firstChild) svg.removeChild(svg.firstChild);
  const evaluated = points.filter((p) => p.accuracy !== null);
  const label = byId("curvelabel");
  if (evaluated.length === 0) {
    label.textContent = "no evaluations yet";
    return;
  }
  const w = 260;
  const h = 120;
  const pad = 6;
  const maxRound = Math.max(...evaluated.map((p) => p.round), 1);
  const ns = "http://www.w3.org/2000/svg";
  const poly = document.createElementNS(ns, "polyline");
  poly.setAttribute(
    "points",
    evaluated
      .map((p) => {
        const x = pad + ((w - 2 * pad) * p.round) / maxRound;
        const y = h - pad - (h - 2 * pad) * (p.accuracy as number);
        return `${x.toFixed(1)},${y.toFixed(1)}`;
      })
      .join(" "),
  );
  svg.append(poly);
  const last = evaluated[evaluated.length - 1];
  if (last) {
    label.textContent =
      `accuracy ${(last.accuracy as number).toFixed(3)}` +
      ` at round ${last.round}`;
  }
}

async function refreshSide() {
  const [info, curve] = await Promise.all([client.session(), client.curve()]);
  session = info;
  renderStatus();
  renderCurve(curve.points);
}

async function loadRound() {
  const payload = await client.queries();
  if (payload.done) {
    finished = true;
    cards = [];
    draft = new BatchDraft([]);
  } else {
    cards = buildCards(payload.queries);
    draft = new BatchDraft(cards.map((c) => c.id));
  }
  renderCards();
}

async function submit() {
  if (busy || finished) return;
  busy = true;
  renderProgress();
  banner(null);
  const ids = draft.order.slice();
  try {
    const result = await client.postLabels(draft.toLabels(), (status) => {
      banner(
        `network failure, labels not dropped; retry ${status.attempt}` +
          ` in ${status.waitMs} ms`,
        "info",
      );
    });
    banner(null);
    renderLastRound(result.entropies, [...ids]);
    await refreshSide();
    await loadRound();
  } catch (err) {
    if (err instanceof ApiError) {
      banner(`server rejected the batch: ${err.detail}`);
      await refreshSide();
      await loadRound(); // reconcile with whatever the server now holds
    } else {
      banner("service unreachable; your labels were kept, submit again");
    }
  } finally {
    busy = false;
    renderProgress();
  }
}

async function abortRound() {
  if (busy || finished || cards.length === 0) return;
  busy = true;
  try {
    await client.abortRound();
    await loadRound(); // the same batch must come back
  } catch (err) {
    banner(err instanceof ApiError ? err.detail : "abort failed");
  } finally {
    busy = false;
    renderProgress();
  }
}

function onKey(event: KeyboardEvent) {
  if (busy || finished || cards.length === 0) return;
  if (event.key === "Enter") {
    if (draft.complete) void submit();
    return;
  }
  if (event.key === "ArrowRight" || event.key === "ArrowDown") {
    draft.moveFocus(1);
    renderCardSelection();
    event.preventDefault();
    return;
  }
  if (event.key === "ArrowLeft" || event.key === "ArrowUp") {
    draft.moveFocus(-1);
    renderCardSelection();
    event.preventDefault();
    return;
  }
  if (event.key === "Backspace" || event.key === "Delete") {
    draft.clearFocused();
    renderCardSelection();
    event.preventDefault();
    return;
  }
  const cls = classForKey(event.key, session?.class_count ?? 0);
  if (cls !== null) {
    draft.assign(cls);
    renderCardSelection();
  }
}

async function init() {
  byId<HTMLButtonElement>("submit").addEventListener(
    "click",
    () => void submit(),
  );
  byId<HTMLButtonElement>("abort").addEventListener(
    "click",
    () => void abortRound(),
  );
  document.addEventListener("keydown", onKey);
  try {
    await refreshSide();
    await loadRound();
  } catch (err) {
    banner(
      err instanceof ApiError
        ? err.detail
        : "labeling service unreachable; start `ctxal serve` and reload",
    );
  }
}

void init();
