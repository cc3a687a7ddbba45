/** Wire types mirroring the study service's JSON payloads. */

export type VolumeAction = "NoVolume" | "LowFluids" | "HighFluids" | "Diuretics";
export type PressorAction = "NoPressor" | "SinglePressor" | "MultiplePressors";

export interface PlanDto {
  volume: VolumeAction;
  vasopressor: PressorAction;
}

export type InterfaceKindName =
  | "CaseFeatures"
  | "TreatmentRisk"
  | "MortalityRisk"
  | "InteractiveTreatmentRisk"
  | "InteractiveMortalityRisk"
  | "PriorClinicianActions"
  | "TreatmentRecommendation";

export interface CaseRefDto {
  patient_id: number;
  step: number;
}

export interface ProvenanceDto {
  neighbor_count: number;
  query_step: number;
}

export interface FeatureFlagDto {
  feature: string;
  case_value: number;
  neighbor_mean: number;
  neighbor_std: number;
  score: number;
}

export interface RiskDto {
  outcome: "PressorAfter12h" | "InAdmissionMortality";
  probability: number;
  band: "Low" | "Moderate" | "High";
  numerator: number;
  denominator: number;
}

export interface DifferenceDto {
  plan: PlanDto;
  risk_with_plan: number;
  risk_without: number;
  z_statistic: number;
  p_value: number;
  significant: boolean;
  insufficient_data: boolean;
  with_count: number;
  without_count: number;
}

export interface PlanCountDto extends PlanDto {
  count: number;
}

export interface FrequencyDto {
  counts: PlanCountDto[];
  volume_marginals: Record<VolumeAction, number>;
  vasopressor_marginals: Record<PressorAction, number>;
  total: number;
}

export interface AxisConsensusDto {
  action: string | null;
  fraction: number;
  consensus: boolean;
}

export interface ConsensusDto {
  volume: AxisConsensusDto;
  vasopressor: AxisConsensusDto;
  total: number;
}

export interface RecommendationDto {
  plan: PlanDto | null;
  basis: "BestRisk" | "MostFrequent";
  supporting: Record<string, unknown>;
}

export type CuePayload =
  | FeatureFlagDto[]
  | RiskDto
  | DifferenceDto
  | FrequencyDto
  | ConsensusDto
  | RecommendationDto;

export interface CueDto {
  kind: string;
  payload: CuePayload;
  provenance: ProvenanceDto;
}

export interface InterfaceViewDto {
  kind: InterfaceKindName;
  case_ref: CaseRefDto;
  interactive: boolean;
  selected_plan: PlanDto | null;
  cues: CueDto[];
}

export interface HistoryPointDto {
  step: number;
  hours: number;
  value: number | null;
  missing: boolean;
  abnormal: boolean;
}

export interface IndicatorDto {
  name: string;
  kind: "numeric" | "binary";
  unit: string;
  organ_system: string;
  normal_range: [number, number] | null;
  current_value: number | null;
  abnormal: boolean;
  trend: "up" | "down" | "flat";
  history: HistoryPointDto[];
}

export interface SchemaFeatureDto {
  name: string;
  kind: "numeric" | "binary";
  unit: string;
  normal_range: [number, number] | null;
  organ_system: string;
}

export interface CaseDetailDto {
  patient_id: number;
  step: number;
  pseudonym: string;
  profile: string;
  demographics: { age_band: string; sex: string };
  vignette: string;
  complicating_factors: string[];
  schema: SchemaFeatureDto[];
  indicators: IndicatorDto[];
}

export interface CaseSummaryDto {
  id: number;
  pseudonym: string;
  step: number;
}

export interface SlotDto {
  case_ref: CaseRefDto;
  kind: InterfaceKindName | null;
}

export interface DecisionDto {
  case_ref: CaseRefDto;
  plan: PlanDto;
  ratings: {
    mental_demand: number;
    confidence: number;
    ai_usefulness: number | null;
  };
  influence_tags: string[];
  free_text: string | null;
}

export interface SessionDto {
  session_id: string;
  participant_id: string;
  assignment: SlotDto[];
  decisions: DecisionDto[];
  created_at: number;
}

export interface DecisionBody extends Omit<DecisionDto, "free_text"> {
  free_text: string | null;
  idempotency_key: string;
}

export const VOLUME_ACTIONS: VolumeAction[] = [
  "NoVolume", "LowFluids", "HighFluids", "Diuretics",
];
export const PRESSOR_ACTIONS: PressorAction[] = [
  "NoPressor", "SinglePressor", "MultiplePressors",
];
