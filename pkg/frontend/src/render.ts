/** DOM builders for the timeline and the explanation panel.
 *
 * Everything takes an explicit Document so the same code renders in the
 * browser and under jsdom in tests. The explanation text is assigned via
 * textContent, so what the service returned is exactly what is shown.
 */

import { viewLabel } from "./state.js";
import type { CausePath, Construct, EventRecord, ExplanationResponse } from "./types.js";

function el(
  doc: Document,
  tag: string,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElement {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function renderTimeline(doc: Document, events: EventRecord[]): HTMLElement {
  const list = el(doc, "ul", { class: "timeline", "data-role": "timeline" });
  for (const event of [...events].reverse()) {
    const row = el(doc, "li", { class: `event kind-${event.kind}` });
    row.appendChild(el(doc, "span", { class: "ts" }, event.ts));
    row.appendChild(
      el(doc, "span", { class: "what" }, `${event.entity}.${event.name} = ${String(event.value)}`),
    );
    row.appendChild(el(doc, "span", { class: "kind" }, event.kind));
    row.appendChild(el(doc, "span", { class: "cause" }, event.caused_by));
    list.appendChild(row);
  }
  if (events.length === 0) {
    list.appendChild(el(doc, "li", { class: "empty" }, "no events in the last hour"));
  }
  return list;
}

function renderCausePath(doc: Document, path: CausePath): HTMLElement {
  const details = el(doc, "details", { class: "cause-path", "data-role": "cause-path", open: "" });
  details.appendChild(el(doc, "summary", {}, `cause path: rule ${path.fired_rule}`));
  const tree = el(doc, "ul", {});
  const preconditions = el(doc, "li", {}, "satisfied preconditions");
  const pList = el(doc, "ul", {});
  for (const fact of path.satisfying_events) {
    pList.appendChild(
      el(doc, "li", { class: "fact" }, `${fact.precondition} (seen ${fact.event.ts})`),
    );
  }
  preconditions.appendChild(pList);
  const actions = el(doc, "li", {}, "executed actions");
  const aList = el(doc, "ul", {});
  for (const sibling of path.sibling_actions) {
    aList.appendChild(
      el(doc, "li", { class: "action" }, `${sibling.action} (at ${sibling.event.ts})`),
    );
  }
  actions.appendChild(aList);
  tree.appendChild(preconditions);
  tree.appendChild(actions);
  details.appendChild(tree);
  return details;
}

function renderConstructs(doc: Document, constructs: Construct[]): HTMLElement {
  const details = el(doc, "details", { class: "constructs", "data-role": "constructs" });
  details.appendChild(el(doc, "summary", {}, `constructs (${constructs.length})`));
  const list = el(doc, "ul", {});
  for (const construct of constructs) {
    const label =
      construct.precondition ?? construct.action ?? construct.owner ?? construct.rule ?? "";
    const row = el(doc, "li", { class: `construct ${construct.category}` });
    row.appendChild(el(doc, "span", { class: "tag" }, construct.category));
    row.appendChild(el(doc, "span", { class: "kind" }, construct.kind));
    row.appendChild(el(doc, "span", { class: "label" }, label));
    list.appendChild(row);
  }
  details.appendChild(list);
  return details;
}

export function renderExplanationPanel(
  doc: Document,
  explanation: ExplanationResponse | null,
  emptyState: string | null,
): HTMLElement {
  const panel = el(doc, "div", { class: "explanation", "data-role": "explanation-panel" });
  if (emptyState !== null) {
    panel.appendChild(el(doc, "p", { class: "empty", "data-role": "empty-state" }, emptyState));
    return panel;
  }
  if (explanation === null) {
    panel.appendChild(
      el(doc, "p", { class: "empty", "data-role": "empty-state" }, "ask why to see an explanation"),
    );
    return panel;
  }
  const badge = el(
    doc,
    "span",
    { class: `badge view-${explanation.view ?? "none"}`, "data-role": "view-badge" },
    viewLabel(explanation.view),
  );
  panel.appendChild(badge);
  panel.appendChild(
    el(doc, "p", { class: "text", "data-role": "explanation-text" }, explanation.text),
  );
  if (explanation.cause_path) {
    panel.appendChild(renderCausePath(doc, explanation.cause_path));
  }
  if (explanation.constructs && explanation.constructs.length > 0) {
    panel.appendChild(renderConstructs(doc, explanation.constructs));
  }
  if (explanation.snapshot) {
    const s = explanation.snapshot;
    panel.appendChild(
      el(
        doc,
        "p",
        { class: "snapshot", "data-role": "snapshot" },
        `context: state=${s.user_state} occurrence=${s.occurrence} ` +
          `technicality=${s.technicality} role=${s.role}${s.degraded ? " (degraded)" : ""}`,
      ),
    );
  }
  return panel;
}
