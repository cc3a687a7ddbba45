/** Browser entry point: wires the API client, session flow, and renderers. */

import { StudyApi } from "./api.js";
import { PlanExplorer, SessionFlow } from "./flow.js";
import {
  renderCasePage,
  renderDebrief,
  renderDecisionForm,
  renderInterface,
  renderNoAiPlaceholder,
  renderRetryBanner,
  renderTutorial,
} from "./render.js";
import type { DecisionInput, SubmitResult } from "./flow.js";
import type { PlanDto, SlotDto } from "./types.js";

const api = new StudyApi("");
const root = document.getElementById("app") as HTMLElement;

function readPlan(form: HTMLFormElement): PlanDto {
  const data = new FormData(form);
  return {
    volume: data.get("volume") as PlanDto["volume"],
    vasopressor: data.get("vasopressor") as PlanDto["vasopressor"],
  };
}

async function showCase(flow: SessionFlow): Promise<void> {
  const slot = flow.currentSlot();
  if (!slot) {
    root.innerHTML = renderDebrief();
    return;
  }
  let detail;
  try {
    detail = await api.caseDetail(slot.case_ref.patient_id);
  } catch {
    root.innerHTML = renderRetryBanner("Could not load the case. Check your connection.");
    root.querySelector(".retry")?.addEventListener("click", () => void showCase(flow));
    return;
  }

  let aiBox = renderNoAiPlaceholder();
  let explorer: PlanExplorer | null = null;
  if (slot.kind !== null) {
    if (slot.kind.startsWith("Interactive")) {
      explorer = new PlanExplorer(api, slot.case_ref.patient_id, slot.kind);
      const first = await explorer.select({ volume: "NoVolume", vasopressor: "NoPressor" });
      aiBox = first ? renderInterface(first) : renderRetryBanner("Sepsis AI is unavailable.");
    } else {
      try {
        aiBox = renderInterface(await api.interfaceView(slot.case_ref.patient_id, slot.kind));
      } catch {
        aiBox = renderRetryBanner("Sepsis AI is unavailable.");
      }
    }
  }
  root.innerHTML = renderCasePage(detail, aiBox) + renderDecisionForm(slot);
  wireInteractions(flow, slot, explorer);
}

function wireInteractions(flow: SessionFlow, slot: SlotDto, explorer: PlanExplorer | null): void {
  const picker = root.querySelector<HTMLFormElement>(".ai-box .plan-picker");
  if (picker && explorer) {
    picker.addEventListener("submit", (event) => {
      event.preventDefault();
      void explorer.select(readPlan(picker)).then((view) => {
        const box = root.querySelector(".panel-right");
        if (box && (view || explorer.view)) {
          box.innerHTML = renderInterface(
            (view ?? explorer.view)!, explorer.lastError);
          wireInteractions(flow, slot, explorer);
        }
      });
    });
  }

  const form = root.querySelector<HTMLFormElement>(".decision-form");
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const input: DecisionInput = {
      plan: readPlan(form),
      mental_demand: Number(data.get("mental_demand")),
      confidence: Number(data.get("confidence")),
      ai_usefulness: data.has("ai_usefulness") ? Number(data.get("ai_usefulness")) : null,
    };
    void flow.submit(input).then((result: SubmitResult) => {
      if (result.status === "recorded") {
        void showCase(flow);
      } else if (result.status === "queued") {
        root.insertAdjacentHTML("beforeend", renderRetryBanner(
          "You appear to be offline; the decision will be submitted automatically."));
        window.addEventListener("online", () => {
          void flow.retryPending().then((retry) => {
            if (retry && retry.status === "recorded") void showCase(flow);
          });
        }, { once: true });
      } else {
        root.insertAdjacentHTML("beforeend",
          renderRetryBanner(`The server rejected the decision: ${result.detail}`));
      }
    });
  });
}

async function boot(): Promise<void> {
  const participant = new URLSearchParams(window.location.search).get("participant")
    ?? `p-${Date.now()}`;
  const seed = Number(new URLSearchParams(window.location.search).get("seed") ?? 0);
  const session = await api.createSession(participant, seed);
  const flow = new SessionFlow(api, session);
  root.innerHTML = renderTutorial();
  root.querySelector(".start")?.addEventListener("click", () => {
    flow.start();
    void showCase(flow);
  });
}

void boot();
