/** HTML renderers for the three-panel study page and the Sepsis AI box.
 *
 * Every number shown comes verbatim from a server payload field (string
 * interpolation only, no client-side arithmetic on cue values); the tests
 * string-compare rendered figures against the payloads.
 */

import { sparkline } from "./sparkline.js";
import type {
  CaseDetailDto,
  ConsensusDto,
  CueDto,
  DifferenceDto,
  FeatureFlagDto,
  FrequencyDto,
  IndicatorDto,
  InterfaceViewDto,
  PlanDto,
  RecommendationDto,
  RiskDto,
  SlotDto,
} from "./types.js";
import { PRESSOR_ACTIONS as PRESSORS, VOLUME_ACTIONS as VOLUMES } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Verbatim figure: the payload value, stringified, nothing else. */
export function fmt(value: number | string | null): string {
  return value === null ? "—" : escapeHtml(String(value));
}

const TREND_ARROW = { up: "▲", down: "▼", flat: "►" } as const;

const ORGAN_LABELS: Record<string, string> = {
  cardiac: "Cardiac",
  respiratory: "Respiratory",
  renal: "Renal",
  hepatic: "Hepatic",
  neurologic: "Neurologic",
  hematologic: "Hematologic",
  metabolic: "Metabolic",
};

const PLAN_LABELS: Record<string, string> = {
  NoVolume: "No volume",
  LowFluids: "Fluids ≤ 1 L",
  HighFluids: "Fluids > 1 L",
  Diuretics: "Diuretics",
  NoPressor: "No vasopressor",
  SinglePressor: "Single vasopressor",
  MultiplePressors: "Multiple vasopressors",
};

export function planLabel(plan: PlanDto): string {
  return `${PLAN_LABELS[plan.volume]} + ${PLAN_LABELS[plan.vasopressor]}`;
}

function featureLabel(name: string): string {
  return escapeHtml(name.replace(/^history_/, "history of ").replace(/_/g, " "));
}

// ---------------------------------------------------------------------------
// Left panel: structured indicators

export function renderIndicatorRow(indicator: IndicatorDto): string {
  const abnormalClass = indicator.abnormal ? " abnormal" : "";
  const value =
    indicator.current_value === null
      ? `<span class="value missing">—</span>`
      : `<span class="value${abnormalClass}">${fmt(indicator.current_value)}` +
        (indicator.unit ? ` <span class="unit">${escapeHtml(indicator.unit)}</span>` : "") +
        `</span>`;
  const history = indicator.history
    .map((p) =>
      `<tr class="${p.abnormal ? "abnormal" : ""}">` +
      `<td>h${fmt(p.hours)}</td><td>${p.value === null ? "—" : fmt(p.value)}</td></tr>`,
    )
    .join("");
  return (
    `<details class="indicator" data-name="${escapeHtml(indicator.name)}">` +
    `<summary><span class="trend trend-${indicator.trend}">${TREND_ARROW[indicator.trend]}</span>` +
    `<span class="name">${featureLabel(indicator.name)}</span>${value}` +
    `${sparkline(indicator.history)}</summary>` +
    `<table class="history">${history}</table>` +
    `</details>`
  );
}

export function renderIndicators(detail: CaseDetailDto): string {
  const groups = new Map<string, IndicatorDto[]>();
  for (const indicator of detail.indicators) {
    const group = groups.get(indicator.organ_system) ?? [];
    group.push(indicator);
    groups.set(indicator.organ_system, group);
  }
  let html = `<div class="indicators">`;
  for (const [system, rows] of groups) {
    html += `<section class="organ-system" data-system="${escapeHtml(system)}">`;
    html += `<h3>${escapeHtml(ORGAN_LABELS[system] ?? system)}</h3>`;
    html += rows.map(renderIndicatorRow).join("");
    html += `</section>`;
  }
  return html + `</div>`;
}

// ---------------------------------------------------------------------------
// Sepsis AI box: one renderer per cue payload

function renderFeatureFlags(flags: FeatureFlagDto[], heading: string): string {
  if (!flags.length) {
    return `<section class="cue"><h4>${heading}</h4>` +
      `<p class="empty">Nothing stands out for this case.</p></section>`;
  }
  const items = flags
    .map(
      (f) =>
        `<li><span class="feature">${featureLabel(f.feature)}</span> ` +
        `<span class="figures">this patient: ${fmt(f.case_value)}; ` +
        `similar patients: ${fmt(f.neighbor_mean)} ± ${fmt(f.neighbor_std)}</span></li>`,
    )
    .join("");
  return `<section class="cue"><h4>${heading}</h4><ul class="feature-flags">${items}</ul></section>`;
}

const OUTCOME_TEXT = {
  PressorAfter12h: "require vasopressors after 12 hours",
  InAdmissionMortality: "die during this admission",
} as const;

const BAND_TEXT = {
  Low: "Unlikely",
  Moderate: "As likely as not",
  High: "Likely",
} as const;

function renderRisk(risk: RiskDto, conditional: PlanDto | null): string {
  const scope = conditional
    ? `among similar patients who received ${escapeHtml(planLabel(conditional))}`
    : "among similar patients";
  return (
    `<section class="cue risk band-${risk.band.toLowerCase()}">` +
    `<h4>${BAND_TEXT[risk.band]} to ${OUTCOME_TEXT[risk.outcome]}</h4>` +
    `<p class="figures">${fmt(risk.numerator)} of ${fmt(risk.denominator)} ${scope}.</p>` +
    `</section>`
  );
}

function renderDifference(diff: DifferenceDto): string {
  if (diff.insufficient_data) {
    return (
      `<section class="cue difference insufficient">` +
      `<h4>Not enough similar patients took this plan</h4>` +
      `<p class="figures">Only ${fmt(diff.with_count)} similar patients received ` +
      `${escapeHtml(planLabel(diff.plan))}; no prediction is shown.</p>` +
      `</section>`
    );
  }
  const highlight = diff.significant ? " significant" : "";
  const verdict = diff.significant
    ? "Statistically significant difference in risk for this plan"
    : "No significant difference in risk for this plan";
  return (
    `<section class="cue difference${highlight}">` +
    `<h4>${verdict}</h4>` +
    `<p class="figures">risk with plan ${fmt(diff.risk_with_plan)} ` +
    `(${fmt(diff.with_count)} patients) vs ${fmt(diff.risk_without)} without ` +
    `(${fmt(diff.without_count)} patients); z = ${fmt(diff.z_statistic)}, ` +
    `p = ${fmt(diff.p_value)}.</p>` +
    `</section>`
  );
}

function renderFrequency(freq: FrequencyDto, selected: PlanDto | null): string {
  if (selected) {
    const row = freq.counts.find(
      (c) => c.volume === selected.volume && c.vasopressor === selected.vasopressor,
    );
    const count = row ? row.count : 0;
    return (
      `<section class="cue frequency">` +
      `<h4>How often similar patients received this plan</h4>` +
      `<p class="figures">${fmt(count)} of ${fmt(freq.total)} similar patients ` +
      `received ${escapeHtml(planLabel(selected))} next.</p>` +
      `</section>`
    );
  }
  const volumeRows = VOLUMES.map(
    (a) => `<tr><td>${PLAN_LABELS[a]}</td><td>${fmt(freq.volume_marginals[a])}</td></tr>`,
  ).join("");
  const pressorRows = PRESSORS.map(
    (a) => `<tr><td>${PLAN_LABELS[a]}</td><td>${fmt(freq.vasopressor_marginals[a])}</td></tr>`,
  ).join("");
  return (
    `<section class="cue frequency">` +
    `<h4>What was done next for ${fmt(freq.total)} similar patients</h4>` +
    `<div class="marginals"><table><caption>Volume</caption>${volumeRows}</table>` +
    `<table><caption>Vasopressors</caption>${pressorRows}</table></div>` +
    `</section>`
  );
}

function renderPlanMentions(freq: FrequencyDto): string {
  const rows = freq.counts
    .map(
      (c) =>
        `<li data-volume="${c.volume}" data-vasopressor="${c.vasopressor}">` +
        `${escapeHtml(planLabel(c))} <span class="count">${fmt(c.count)}</span></li>`,
    )
    .join("");
  return (
    `<section class="cue plan-mentions"><h4>Treatment plans</h4>` +
    `<ul class="plan-space">${rows}</ul></section>`
  );
}

function renderConsensus(consensus: ConsensusDto): string {
  const axis = (label: string, a: ConsensusDto["volume"]) =>
    a.consensus
      ? `<p class="axis consensus">${label}: most clinicians chose ` +
        `<strong>${PLAN_LABELS[a.action as string] ?? escapeHtml(String(a.action))}</strong>.</p>`
      : `<p class="axis no-consensus">${label}: no single action was consistently taken.</p>`;
  return (
    `<section class="cue consensus">` +
    `<h4>Clinician consensus among ${fmt(consensus.total)} similar patients</h4>` +
    axis("Volume", consensus.volume) +
    axis("Vasopressors", consensus.vasopressor) +
    `</section>`
  );
}

function renderRecommendation(rec: RecommendationDto): string {
  if (rec.plan === null) {
    return (
      `<section class="cue recommendation none">` +
      `<h4>No recommendation</h4>` +
      `<p>Too few similar patients took any one plan to recommend one.</p>` +
      `</section>`
    );
  }
  const basisText = rec.basis === "BestRisk"
    ? "lowest observed risk among similar patients"
    : "the actions most often taken for similar patients";
  const supporting =
    rec.basis === "BestRisk"
      ? `<p class="figures">${fmt(rec.supporting["numerator"] as number)} of ` +
        `${fmt(rec.supporting["denominator"] as number)} similar patients on this plan ` +
        `had the outcome.</p>`
      : "";
  return (
    `<section class="cue recommendation">` +
    `<h4>Suggested plan: ${escapeHtml(planLabel(rec.plan))}</h4>` +
    `<p>Based on ${basisText}.</p>` + supporting +
    `</section>`
  );
}

// ---------------------------------------------------------------------------
// Interface dispatch

const CUE_HEADINGS: Record<string, string> = {
  R1_ConsistentFeatures: "Most consistent with similar patients",
  R2_UnusualFeatures: "Most unusual for this patient",
};

function renderCue(cue: CueDto, view: InterfaceViewDto): string {
  switch (cue.kind) {
    case "R1_ConsistentFeatures":
    case "R2_UnusualFeatures":
      return renderFeatureFlags(cue.payload as FeatureFlagDto[], CUE_HEADINGS[cue.kind]);
    case "R3_RiskScore":
      return renderRisk(cue.payload as RiskDto, view.interactive ? view.selected_plan : null);
    case "R4_DifferenceInRisk":
      return renderDifference(cue.payload as DifferenceDto);
    case "R5_ActionFrequency":
      return renderFrequency(cue.payload as FrequencyDto,
                             view.interactive ? view.selected_plan : null);
    case "R6_ConsensusAction":
      return renderConsensus(cue.payload as ConsensusDto);
    case "R7_PlanMention":
      return renderPlanMentions(cue.payload as FrequencyDto);
    case "R8_RecommendedPlan":
      return renderRecommendation(cue.payload as RecommendationDto);
    default:
      return `<section class="cue unknown"><h4>${escapeHtml(cue.kind)}</h4></section>`;
  }
}

export function renderPlanPicker(selected: PlanDto | null): string {
  const options = (actions: readonly string[], chosen: string | undefined) =>
    actions
      .map(
        (a) =>
          `<option value="${a}"${a === chosen ? " selected" : ""}>${PLAN_LABELS[a]}</option>`,
      )
      .join("");
  return (
    `<form class="plan-picker">` +
    `<label>Volume <select name="volume">${options(VOLUMES, selected?.volume)}</select></label>` +
    `<label>Vasopressors <select name="vasopressor">${options(PRESSORS, selected?.vasopressor)}</select></label>` +
    `<button type="submit">Show prediction</button>` +
    `</form>`
  );
}

export function renderInterface(view: InterfaceViewDto, inlineError: string | null = null): string {
  const title = view.interactive
    ? `Sepsis AI — select a plan to see its predicted outcome`
    : `Sepsis AI`;
  let html = `<div class="ai-box" data-kind="${view.kind}"><h2>${title}</h2>`;
  if (view.interactive) {
    html += renderPlanPicker(view.selected_plan);
  }
  if (inlineError) {
    html += `<p class="inline-error">${escapeHtml(inlineError)}</p>`;
  }
  html += view.cues.map((cue) => renderCue(cue, view)).join("");
  return html + `</div>`;
}

export function renderNoAiPlaceholder(): string {
  return (
    `<div class="ai-box no-ai"><h2>No AI for this case</h2>` +
    `<p>Review the chart and vignette, then give your recommendation.</p></div>`
  );
}

// ---------------------------------------------------------------------------
// Page assembly

export function renderCasePage(detail: CaseDetailDto, aiBoxHtml: string): string {
  return (
    `<div class="case-page three-panel">` +
    `<aside class="panel panel-left">` +
    `<header><h2>${escapeHtml(detail.pseudonym)}</h2>` +
    `<p class="profile">${escapeHtml(detail.profile)}</p></header>` +
    renderIndicators(detail) +
    `</aside>` +
    `<main class="panel panel-center"><h3>Presentation</h3>` +
    `<p class="vignette">${escapeHtml(detail.vignette)}</p></main>` +
    `<aside class="panel panel-right">${aiBoxHtml}</aside>` +
    `</div>`
  );
}

export function renderRetryBanner(message: string): string {
  return (
    `<div class="retry-banner" role="alert">` +
    `<p>${escapeHtml(message)}</p><button class="retry">Retry</button></div>`
  );
}

/** Decision entry; the AI-usefulness rating exists only when AI was shown. */
export function renderDecisionForm(slot: SlotDto): string {
  const rating = (name: string, label: string) =>
    `<label class="rating">${label}` +
    `<input type="number" name="${name}" min="1" max="10" required></label>`;
  let html =
    `<form class="decision-form">` +
    `<h3>Your recommendation for the next four hours</h3>` +
    renderPlanPicker(null).replace(`<button type="submit">Show prediction</button>`, "") +
    rating("mental_demand", "How mentally demanding was this case? (1–10)") +
    rating("confidence", "How confident are you in your decision? (1–10)");
  if (slot.kind !== null) {
    html += rating("ai_usefulness", "How useful was the Sepsis AI information? (1–10)");
  }
  html += `<button type="submit">Submit decision</button></form>`;
  return html;
}

export function renderTutorial(): string {
  return (
    `<div class="tutorial"><h2>Welcome</h2>` +
    `<p>You will review four ICU patients with suspected sepsis. For each one, ` +
    `read the chart and presentation, then recommend a treatment plan for the ` +
    `next four hours in terms of volume (IV fluids or diuretics) and vasopressors.</p>` +
    `<p>For some cases a box labeled Sepsis AI shows insights derived from ` +
    `similar past patients. Use it however you see fit.</p>` +
    `<button class="start">Start the first case</button></div>`
  );
}

export function renderDebrief(): string {
  const prompts = [
    "Which AI presentation did you find most helpful, and why?",
    "Would more or fewer treatment options in the AI box change your decisions or confidence?",
    "If the AI had disagreed more strongly with your assessment, how would that affect your thinking?",
    "How did these cases compare to the ones you see day to day?",
  ];
  return (
    `<div class="debrief"><h2>Debrief</h2><ol>` +
    prompts.map((p) => `<li>${p}</li>`).join("") +
    `</ol><p>Thank you for participating.</p></div>`
  );
}
