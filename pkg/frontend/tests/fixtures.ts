/** Loads the committed server-payload fixtures (regenerate with
 * `python3 frontend/tools/make_fixtures.py`). */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { CaseDetailDto, InterfaceViewDto, SessionDto } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export function loadFixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", `${name}.json`), "utf-8")) as T;
}

export const INTERFACE_FIXTURES = [
  "case_features",
  "treatment_risk",
  "mortality_risk",
  "interactive_treatment_risk",
  "interactive_mortality_risk",
  "prior_clinician_actions",
  "treatment_recommendation",
] as const;

export const STATE_FIXTURES = [
  "interactive_mortality_risk_significant",
  "interactive_treatment_risk_insufficient",
  "prior_clinician_actions_no_consensus",
  "treatment_recommendation_none",
] as const;

export const view = (name: string) => loadFixture<InterfaceViewDto>(name);
export const caseDetail = () => loadFixture<CaseDetailDto>("case_detail");
export const session = () => loadFixture<SessionDto>("session");
