/** Dashboard bootstrap: wires the session state to the static page. */

import { WhyhubClient } from "./api.js";
import { renderExplanationPanel, renderTimeline } from "./render.js";
import { SessionState } from "./state.js";
import type { ContextOverrides } from "./types.js";

const POLL_MS = 2000;

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function swap(container: HTMLElement, child: HTMLElement): void {
  container.replaceChildren(child);
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? window.location.origin;
  const state = new SessionState(new WhyhubClient(base));

  const personaSelect = byId<HTMLSelectElement>("persona");
  const timelineBox = byId<HTMLDivElement>("timeline-box");
  const panelBox = byId<HTMLDivElement>("panel-box");
  const errorBox = byId<HTMLParagraphElement>("inline-error");
  const statusDot = byId<HTMLSpanElement>("status");

  function paintPanel(): void {
    swap(panelBox, renderExplanationPanel(document, state.lastExplanation, state.emptyState));
  }

  function paintError(): void {
    errorBox.textContent = state.inlineError ?? "";
    errorBox.hidden = state.inlineError === null;
  }

  async function paintTimeline(): Promise<void> {
    try {
      await state.refreshTimeline();
      statusDot.className = "dot live";
      swap(timelineBox, renderTimeline(document, state.timeline));
    } catch {
      statusDot.className = "dot dead";
    }
  }

  await state.loadPersonas();
  for (const persona of state.personas) {
    const option = document.createElement("option");
    option.value = persona.id;
    option.textContent = `${persona.name} (${persona.role})`;
    personaSelect.appendChild(option);
  }
  if (state.activePersona) personaSelect.value = state.activePersona;

  personaSelect.addEventListener("change", () => {
    state.selectPersona(personaSelect.value);
    paintPanel();
    paintError();
  });

  for (const key of ["user_state", "occurrence", "technicality", "role"] as const) {
    const select = byId<HTMLSelectElement>(`override-${key}`);
    select.addEventListener("change", () => {
      state.setOverride(key as keyof ContextOverrides, select.value || null);
    });
  }

  byId<HTMLFormElement>("event-form").addEventListener("submit", async (submit) => {
    submit.preventDefault();
    const entity = byId<HTMLInputElement>("event-entity").value;
    const name = byId<HTMLInputElement>("event-name").value;
    const value = byId<HTMLInputElement>("event-value").value;
    const kind = byId<HTMLSelectElement>("event-kind").value as
      | "property_change"
      | "action_executed";
    await state.triggerEvent(entity, name, value, kind);
    paintError();
    if (state.inlineError === null) {
      swap(timelineBox, renderTimeline(document, state.timeline));
    }
  });

  byId<HTMLFormElement>("why-form").addEventListener("submit", async (submit) => {
    submit.preventDefault();
    const entity = byId<HTMLInputElement>("why-entity").value.trim();
    const action = byId<HTMLInputElement>("why-action").value.trim();
    try {
      await state.askWhy(entity || undefined, action || undefined);
      state.inlineError = null;
    } catch (error) {
      state.inlineError = error instanceof Error ? error.message : String(error);
    }
    paintPanel();
    paintError();
  });

  await paintTimeline();
  paintPanel();
  window.setInterval(paintTimeline, POLL_MS);
}

document.addEventListener("DOMContentLoaded", () => {
  void boot();
});
