/** Client-side session flow: tutorial -> four cases -> debrief.
 *
 * Back-navigation to submitted slots is disabled, decisions carry stable
 * idempotency keys so retries cannot double-record, and submissions that
 * fail from connectivity loss are queued and retried.
 */

import { ApiError, StudyApi } from "./api.js";
import type {
  DecisionBody,
  InterfaceKindName,
  InterfaceViewDto,
  PlanDto,
  SessionDto,
  SlotDto,
} from "./types.js";

export type Stage = "tutorial" | "case" | "debrief";

export interface DecisionInput {
  plan: PlanDto;
  mental_demand: number;
  confidence: number;
  /** Ignored on no-AI slots; required by the server on AI slots. */
  ai_usefulness?: number | null;
  influence_tags?: string[];
  free_text?: string | null;
}

export type SubmitResult =
  | { status: "recorded"; session: SessionDto }
  | { status: "queued" }
  | { status: "rejected"; detail: string };

interface PendingSubmit {
  body: DecisionBody;
}

export class SessionFlow {
  stage: Stage = "tutorial";
  private session: SessionDto;
  private pending: PendingSubmit | null = null;

  constructor(private readonly api: StudyApi, session: SessionDto) {
    this.session = session;
  }

  get sessionState(): SessionDto {
    return this.session;
  }

  get slotIndex(): number {
    return this.session.decisions.length;
  }

  get complete(): boolean {
    return this.slotIndex >= this.session.assignment.length;
  }

  currentSlot(): SlotDto | null {
    return this.complete ? null : this.session.assignment[this.slotIndex];
  }

  start(): void {
    this.stage = this.complete ? "debrief" : "case";
  }

  /** Submitted slots are locked; only the current slot is reachable. */
  canNavigateTo(index: number): boolean {
    return index === this.slotIndex && !this.complete;
  }

  hasPendingSubmit(): boolean {
    return this.pending !== null;
  }

  /** One stable key per slot: a duplicate submit replays, never double-records. */
  idempotencyKey(slotIndex: number): string {
    return `${this.session.session_id}:${slotIndex}`;
  }

  decisionBody(input: DecisionInput): DecisionBody {
    const slot = this.currentSlot();
    if (!slot) throw new Error("session is complete");
    const aiShown = slot.kind !== null;
    return {
      case_ref: slot.case_ref,
      plan: input.plan,
      ratings: {
        mental_demand: input.mental_demand,
        confidence: input.confidence,
        ai_usefulness: aiShown ? input.ai_usefulness ?? null : null,
      },
      influence_tags: input.influence_tags ?? [],
      free_text: input.free_text ?? null,
      idempotency_key: this.idempotencyKey(this.slotIndex),
    };
  }

  async submit(input: DecisionInput): Promise<SubmitResult> {
    const body = this.decisionBody(input);
    return this.send(body);
  }

  private async send(body: DecisionBody): Promise<SubmitResult> {
    try {
      const session = await this.api.submitDecision(this.session.session_id, body);
      this.session = session;
      this.pending = null;
      if (this.complete) this.stage = "debrief";
      return { status: "recorded", session };
    } catch (error) {
      if (error instanceof ApiError) {
        // the server rejected the payload; surface it, nothing to retry
        return { status: "rejected", detail: error.detail };
      }
      this.pending = { body };   // offline: queue and retry later
      return { status: "queued" };
    }
  }

  /** Replay the queued submission once connectivity returns. */
  async retryPending(): Promise<SubmitResult | null> {
    if (!this.pending) return null;
    return this.send(this.pending.body);
  }
}

/** Interactive-interface state: the prior selection is kept when a query
 * fails validation, and re-selecting the same plan re-renders identically. */
export class PlanExplorer {
  view: InterfaceViewDto | null = null;
  selected: PlanDto | null = null;
  lastError: string | null = null;

  constructor(
    private readonly api: StudyApi,
    private readonly patientId: number,
    private readonly kind: InterfaceKindName,
  ) {}

  async select(plan: PlanDto): Promise<InterfaceViewDto | null> {
    try {
      const view = await this.api.interfaceQuery(this.patientId, this.kind, plan);
      this.view = view;
      this.selected = plan;
      this.lastError = null;
      return view;
    } catch (error) {
      this.lastError = error instanceof ApiError ? error.detail : "network failure";
      return null;   // prior view/selection intentionally preserved
    }
  }
}
