/** Typed client for the study service HTTP API. */

import type {
  CaseDetailDto,
  CaseSummaryDto,
  DecisionBody,
  InterfaceKindName,
  InterfaceViewDto,
  PlanDto,
  SessionDto,
} from "./types.js";

/** An HTTP error carrying the server's detail message. Network failures
 * (offline, refused) surface as the underlying fetch rejection instead. */
export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class StudyApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
        else if (body) detail = JSON.stringify(body.detail ?? body);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listCases(): Promise<CaseSummaryDto[]> {
    return this.request("/api/cases");
  }

  caseDetail(patientId: number): Promise<CaseDetailDto> {
    return this.request(`/api/cases/${patientId}`);
  }

  interfaceView(patientId: number, kind: InterfaceKindName): Promise<InterfaceViewDto> {
    return this.request(`/api/cases/${patientId}/interface/${kind}`);
  }

  interfaceQuery(
    patientId: number,
    kind: InterfaceKindName,
    plan: PlanDto,
  ): Promise<InterfaceViewDto> {
    return this.post(`/api/cases/${patientId}/interface/${kind}/query`, plan);
  }

  createSession(participantId: string, seed: number): Promise<SessionDto> {
    return this.post("/api/sessions", { participant_id: participantId, seed });
  }

  submitDecision(sessionId: string, body: DecisionBody): Promise<SessionDto> {
    return this.post(`/api/sessions/${sessionId}/decisions`, body);
  }

  getSession(sessionId: string): Promise<SessionDto> {
    return this.request(`/api/sessions/${sessionId}`);
  }
}
