/** Snapshot coverage: every interface kind the server can emit, the special
 * payload states, the three-panel case page, and both decision forms. */

import { describe, expect, it } from "vitest";

import {
  renderCasePage,
  renderDecisionForm,
  renderInterface,
  renderNoAiPlaceholder,
} from "../src/render.js";
import {
  INTERFACE_FIXTURES,
  STATE_FIXTURES,
  caseDetail,
  session,
  view,
} from "./fixtures.js";

describe("interface rendering", () => {
  for (const name of INTERFACE_FIXTURES) {
    it(`renders ${name}`, () => {
      expect(renderInterface(view(name))).toMatchSnapshot();
    });
  }

  for (const name of STATE_FIXTURES) {
    it(`renders the ${name} state`, () => {
      expect(renderInterface(view(name))).toMatchSnapshot();
    });
  }

  it("marks the significant-difference state with highlight styling", () => {
    const html = renderInterface(view("interactive_mortality_risk_significant"));
    expect(html).toContain('class="cue difference significant"');
    expect(html).toContain("Statistically significant difference");
    expect(html).toContain("Suggested plan");
  });

  it("shows the insufficient-data message instead of a prediction", () => {
    const html = renderInterface(view("interactive_treatment_risk_insufficient"));
    expect(html).toContain("Not enough similar patients took this plan");
    expect(html).toContain('class="cue difference insufficient"');
    expect(html).not.toContain("Suggested plan");
  });

  it("renders an explicit no-consensus marker", () => {
    const html = renderInterface(view("prior_clinician_actions_no_consensus"));
    expect(html).toContain("no single action was consistently taken");
  });

  it("renders an explicit no-recommendation state", () => {
    const html = renderInterface(view("treatment_recommendation_none"));
    expect(html).toContain("No recommendation");
  });

  it("keeps the plan picker selection in interactive views", () => {
    const html = renderInterface(view("interactive_treatment_risk"));
    expect(html).toContain('<option value="LowFluids" selected>');
    expect(html).toContain('<option value="MultiplePressors" selected>');
  });

  it("shows an inline error above the cues without dropping them", () => {
    const html = renderInterface(view("interactive_treatment_risk"), "bad plan");
    expect(html).toContain('class="inline-error"');
    expect(html).toContain("bad plan");
    expect(html).toContain('class="plan-space"');
  });
});

describe("case page", () => {
  it("renders the three-panel layout with 56 indicators", () => {
    const detail = caseDetail();
    const html = renderCasePage(detail, renderNoAiPlaceholder());
    expect((html.match(/<details class="indicator"/g) ?? []).length).toBe(56);
    expect(html).toContain("panel-left");
    expect(html).toContain("panel-center");
    expect(html).toContain("panel-right");
    expect(html).toContain(detail.pseudonym);
    expect(html).toMatchSnapshot();
  });

  it("styles abnormal current values red and keeps missing values blank", () => {
    const detail = caseDetail();
    const html = renderCasePage(detail, renderNoAiPlaceholder());
    for (const indicator of detail.indicators) {
      if (indicator.abnormal) {
        expect(html).toContain(`data-name="${indicator.name}"`);
      }
    }
    const abnormalCount = detail.indicators.filter((i) => i.abnormal).length;
    expect((html.match(/class="value abnormal"/g) ?? []).length).toBe(abnormalCount);
  });

  it("shows the no-AI placeholder when the slot has no interface", () => {
    const html = renderNoAiPlaceholder();
    expect(html).toContain("No AI for this case");
    expect(html).toMatchSnapshot();
  });
});

describe("decision form", () => {
  it("includes the AI-usefulness rating only on AI slots", () => {
    const slots = session().assignment;
    const aiSlot = slots.find((s) => s.kind !== null)!;
    const noAiSlot = slots.find((s) => s.kind === null)!;
    expect(renderDecisionForm(aiSlot)).toContain('name="ai_usefulness"');
    expect(renderDecisionForm(noAiSlot)).not.toContain("ai_usefulness");
    expect(renderDecisionForm(aiSlot)).toMatchSnapshot();
    expect(renderDecisionForm(noAiSlot)).toMatchSnapshot();
  });
});
