// @vitest-environment jsdom
//
// End-to-end: a real service instance (seeded from the bundled tv-mute
// scenario with only the tv-on event replayed), driven exclusively through
// the dashboard's own client, state, and render code.
//
// Flow under test: as Dana, trigger the meeting-start event, ask why, and
// see the simplified golden text; switch to Alice, re-ask, and see the
// full golden text.
import { type ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { WhyhubClient } from "../src/api.js";
import { renderExplanationPanel } from "../src/render.js";
import { SessionState } from "../src/state.js";

const GOLDEN_DANA =
  "Hi Dana, Bob has set up a rule and at this moment, the rule has been fired.";
const GOLDEN_ALICE =
  'Hi Alice, tv_mute is active because Bob has set up a rule: "Rule_2: mutes the TV if ' +
  'the TV is playing while a meeting is going on" and currently a meeting in room 1 is ' +
  "going on and the TV is playing, so the rule has been fired.";

const PORT = 18000 + Math.floor(Math.random() * 10_000);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;

async function waitForHealth(timeoutMs = 20_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error("service did not become healthy");
}

beforeAll(async () => {
  service = spawn(
    "python3",
    [
      "-m",
      "whyhub.cli",
      "serve",
      "--scenario",
      "tv-mute",
      "--port",
      String(PORT),
      "--replay-events",
      "1",
    ],
    { stdio: "ignore" },
  );
  await waitForHealth();
}, 30_000);

afterAll(() => {
  service?.kill();
});

describe("dashboard against a live service", () => {
  it("runs the Dana then Alice golden flow", async () => {
    const state = new SessionState(new WhyhubClient(BASE));
    await state.loadPersonas();
    expect(state.personas.map((p) => p.id).sort()).toEqual(["alice", "bob", "dana"]);

    state.selectPersona("dana");
    // the replayed prefix contains only the tv-on event; no rule has fired
    await state.refreshTimeline();
    expect(state.timeline.map((e) => e.kind)).toEqual(["property_change"]);

    // Dana starts the meeting; the mute rule fires live
    const posted = await state.triggerEvent("room1", "meeting", "true");
    expect(state.inlineError).toBeNull();
    expect(posted?.fired).toEqual(["rule_2"]);
    // the rule's action lands a short delay after the trigger
    await new Promise((resolve) => setTimeout(resolve, 300));
    await state.refreshTimeline();
    expect(state.timeline.map((e) => e.kind)).toEqual([
      "property_change",
      "property_change",
      "rule_fired",
      "action_executed",
    ]);

    // Dana asks why ("what just happened?")
    const dana = await state.askWhy();
    expect(dana.explanation?.text).toBe(GOLDEN_DANA);
    let panel = renderExplanationPanel(document, state.lastExplanation, state.emptyState);
    expect(panel.querySelector('[data-role="explanation-text"]')?.textContent).toBe(GOLDEN_DANA);
    expect(panel.querySelector('[data-role="view-badge"]')?.textContent).toBe("Simplified");
    // the rule is masked in the headline text but inspectable in the debug tree
    expect(panel.querySelector('[data-role="explanation-text"]')?.textContent).not.toContain(
      "Rule_2",
    );
    expect(panel.querySelector('[data-role="cause-path"]')?.textContent).toContain("rule_2");

    // switching persona and re-asking shows Alice's full explanation
    state.selectPersona("alice");
    const alice = await state.askWhy();
    expect(alice.explanation?.text).toBe(GOLDEN_ALICE);
    panel = renderExplanationPanel(document, state.lastExplanation, state.emptyState);
    expect(panel.querySelector('[data-role="explanation-text"]')?.textContent).toBe(GOLDEN_ALICE);
    expect(panel.querySelector('[data-role="view-badge"]')?.textContent).toBe("Full");

    // same cause either way: debug payloads agree on the fired rule
    expect(dana.explanation?.cause_path?.fired_rule).toBe("rule_2");
    expect(alice.explanation?.cause_path?.fired_rule).toBe("rule_2");

    // exploration is side-effect free: occurrence stayed first_time throughout
    expect(alice.explanation?.snapshot?.occurrence).toBe("first_time");
    const danaAgain = await (async () => {
      state.selectPersona("dana");
      return state.askWhy();
    })();
    expect(danaAgain.explanation?.snapshot?.occurrence).toBe("first_time");
    expect(danaAgain.explanation?.text).toBe(GOLDEN_DANA);
  }, 30_000);

  it("supports what-if overrides without touching the server", async () => {
    const state = new SessionState(new WhyhubClient(BASE));
    await state.loadPersonas();
    state.selectPersona("alice");
    state.setOverride("role", "guest");
    const asGuest = await state.askWhy();
    expect(asGuest.explanation?.view).toBe("simplified");
    state.setOverride("role", null);
    const live = await state.askWhy();
    expect(live.explanation?.view).toBe("full");
  }, 30_000);
});
