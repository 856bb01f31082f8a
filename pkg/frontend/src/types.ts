/** Wire types mirroring the service's JSON API. */

export type Scalar = boolean | number | string;

export interface EventRecord {
  ts: string;
  entity: string;
  kind: "property_change" | "action_executed" | "rule_fired";
  name: string;
  value: Scalar;
  caused_by: string;
}

export interface UserProfile {
  id: string;
  name: string;
  technicality: string;
  role: string;
}

export interface ContextSnapshot {
  user_name: string;
  user_state: string;
  occurrence: string;
  technicality: string;
  role: string;
  degraded: boolean;
}

export interface PathFact {
  precondition: string;
  event: EventRecord;
}

export interface PathAction {
  action: string;
  event: EventRecord;
}

export interface CausePath {
  fired_rule: string;
  fired_at: string;
  satisfying_events: PathFact[];
  sibling_actions: PathAction[];
  explanandum_event: EventRecord;
}

export interface Construct {
  category: "algorithmic" | "contextual";
  kind: string;
  rule?: string;
  precondition?: string;
  action?: string;
  owner?: string;
  position?: number;
  event?: EventRecord;
}

export interface ExplanationResponse {
  view: string | null;
  text: string;
  explanandum?: { entity: string; action: string; explainee: string };
  snapshot?: ContextSnapshot;
  cause_path?: CausePath | null;
  constructs?: Construct[];
}

export interface ExplainRequest {
  user_id: string;
  entity?: string;
  action?: string;
  at?: string;
  debug?: boolean;
  context_overrides?: Record<string, string>;
}

/** Client-side context overrides; sent only with debug requests. */
export interface ContextOverrides {
  user_state?: string;
  occurrence?: string;
  technicality?: string;
  role?: string;
}
