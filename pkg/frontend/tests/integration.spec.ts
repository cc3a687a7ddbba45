/** Live round-trip against a running study service.
 *
 * Skipped unless SEPSISAI_SERVER is set, e.g.
 *   sepsisai serve --data-dir data --port 8321 &
 *   SEPSISAI_SERVER=http://127.0.0.1:8321 npm run test:integration
 */

import { describe, expect, it } from "vitest";

import { StudyApi } from "../src/api.js";

const server = process.env.SEPSISAI_SERVER;

describe.skipIf(!server)("live server round trip", () => {
  const api = new StudyApi(server ?? "");

  it("answers an interactive plan query in under 200 ms", async () => {
    const cases = await api.listCases();
    expect(cases.length).toBeGreaterThan(0);
    const plan = { volume: "LowFluids", vasopressor: "NoPressor" } as const;

    // warm up once, then time the round trip
    await api.interfaceQuery(cases[0].id, "InteractiveTreatmentRisk", plan);
    const samples: number[] = [];
    for (let i = 0; i < 5; i++) {
      const t0 = performance.now();
      const view = await api.interfaceQuery(cases[0].id, "InteractiveTreatmentRisk", plan);
      samples.push(performance.now() - t0);
      expect(view.kind).toBe("InteractiveTreatmentRisk");
      expect(view.cues.length).toBeGreaterThanOrEqual(4);
    }
    samples.sort((a, b) => a - b);
    const median = samples[Math.floor(samples.length / 2)];
    expect(median).toBeLessThan(200);
  });

  it("never shows an ai_usefulness prompt for the no-AI slot", async () => {
    const session = await api.createSession("integration", 1);
    const { renderDecisionForm } = await import("../src/render.js");
    for (const slot of session.assignment) {
      const html = renderDecisionForm(slot);
      if (slot.kind === null) {
        expect(html).not.toContain("ai_usefulness");
      } else {
        expect(html).toContain("ai_usefulness");
      }
    }
  });
});
