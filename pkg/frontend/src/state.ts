/** Session state: the active persona, the polled timeline, the last
 * explanation, and client-side context overrides.
 *
 * Overrides ride along as debug parameters on subsequent requests only;
 * they never touch server-side history. Switching persona aborts any
 * in-flight explanation request and drops its result.
 */

import { ApiError, WhyhubClient } from "./api.js";
import type {
  ContextOverrides,
  EventRecord,
  ExplainRequest,
  ExplanationResponse,
  Scalar,
  UserProfile,
} from "./types.js";

export type ParsedValue = { ok: true; value: Scalar } | { ok: false; error: string };

/** Parse a form value: JSON scalars pass through, bare words become strings. */
export function parseEventValue(raw: string): ParsedValue {
  const text = raw.trim();
  if (text === "") {
    return { ok: false, error: "value must not be empty" };
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch {
    return { ok: true, value: text }; // bare word, e.g. `on`
  }
  if (
    typeof parsed === "boolean" ||
    typeof parsed === "number" ||
    typeof parsed === "string"
  ) {
    return { ok: true, value: parsed };
  }
  return { ok: false, error: "value must be a boolean, number, or string" };
}

export function viewLabel(view: string | null): string {
  if (!view) return "No cause";
  return view.charAt(0).toUpperCase() + view.slice(1);
}

export interface AskOutcome {
  explanation: ExplanationResponse | null;
  emptyState: string | null;
}

export class SessionState {
  personas: UserProfile[] = [];
  activePersona: string | null = null;
  timeline: EventRecord[] = [];
  lastExplanation: ExplanationResponse | null = null;
  emptyState: string | null = null;
  inlineError: string | null = null;
  overrides: ContextOverrides = {};

  private controller: AbortController | null = null;

  constructor(readonly client: WhyhubClient) {}

  async loadPersonas(): Promise<UserProfile[]> {
    this.personas = await this.client.users();
    if (this.activePersona === null && this.personas.length > 0) {
      this.activePersona = this.personas[0]!.id;
    }
    return this.personas;
  }

  /** Switching persona cancels any in-flight ask and clears the panel. */
  selectPersona(id: string): void {
    if (id === this.activePersona) return;
    this.activePersona = id;
    this.controller?.abort();
    this.controller = null;
    this.lastExplanation = null;
    this.emptyState = null;
    this.inlineError = null;
  }

  setOverride(key: keyof ContextOverrides, value: string | null): void {
    if (value === null || value === "") {
      delete this.overrides[key];
    } else {
      this.overrides[key] = value;
    }
  }

  async refreshTimeline(minutes = 60): Promise<EventRecord[]> {
    // The upper bound leads the clock slightly: rule actions are logged a
    // short delay after their trigger, and client clocks skew.
    const now = Date.now();
    this.timeline = await this.client.events(
      new Date(now - minutes * 60_000).toISOString(),
      new Date(now + 5_000).toISOString(),
    );
    return this.timeline;
  }

  /** POST the event as the active persona; malformed values never leave the client. */
  async triggerEvent(
    entity: string,
    name: string,
    rawValue: string,
    kind: EventRecord["kind"] = "property_change",
  ): Promise<{ fired: string[] } | null> {
    this.inlineError = null;
    const parsed = parseEventValue(rawValue);
    if (!parsed.ok) {
      this.inlineError = parsed.error;
      return null;
    }
    if (!entity.trim() || !name.trim()) {
      this.inlineError = "entity and name are required";
      return null;
    }
    try {
      const result = await this.client.postEvent({
        entity: entity.trim(),
        name: name.trim(),
        value: parsed.value,
        kind,
        caused_by: this.activePersona ? `user:${this.activePersona}` : "none",
      });
      await this.refreshTimeline();
      return { fired: result.fired_rules };
    } catch (error) {
      this.inlineError = error instanceof ApiError ? error.message : String(error);
      return null;
    }
  }

  /** Ask why: always a debug request so the panel gets the cause path and
   * construct set, and exploration leaves no occurrence trace. */
  async askWhy(entity?: string, action?: string): Promise<AskOutcome> {
    if (!this.activePersona) {
      throw new Error("no persona selected");
    }
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const request: ExplainRequest = {
      user_id: this.activePersona,
      debug: true,
    };
    if (entity && action) {
      request.entity = entity;
      request.action = action;
    }
    if (Object.keys(this.overrides).length > 0) {
      request.context_overrides = { ...this.overrides };
    }
    try {
      const explanation = await this.client.explain(request, controller.signal);
      if (controller.signal.aborted) {
        return { explanation: null, emptyState: null };
      }
      this.lastExplanation = explanation;
      this.emptyState = null;
      return { explanation, emptyState: null };
    } catch (error) {
      if (controller.signal.aborted) {
        return { explanation: null, emptyState: null };
      }
      if (error instanceof ApiError && error.code === "nothing_to_explain") {
        this.lastExplanation = null;
        this.emptyState = "Nothing to explain yet: no recent system action.";
        return { explanation: null, emptyState: this.emptyState };
      }
      throw error;
    } finally {
      if (this.controller === controller) {
        this.controller = null;
      }
    }
  }
}
