/**
 * Browser entry point: wires the submission form and the job page together.
 * All state is derived from server snapshots; the only client-side state is
 * which MCQ answers have been revealed (and that never leaves the page).
 */
import { ApiError, GatewayClient } from "./api.js";
import { parseKeywordInput, validateKeywords, validateReportText } from "./forms.js";
import { pollJob } from "./poller.js";
import { JobSnapshot } from "./types.js";
import { renderErrorBanner, renderJob } from "./view.js";

interface PageElements {
  form: HTMLFormElement;
  reportText: HTMLTextAreaElement;
  impression: HTMLInputElement;
  formError: HTMLElement;
  jobRoot: HTMLElement;
}

function requireElement<T extends Element>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as unknown as T;
}

export function startConsole(client = new GatewayClient()): void {
  const els: PageElements = {
    form: requireElement<HTMLFormElement>("case-form"),
    reportText: requireElement<HTMLTextAreaElement>("report-text"),
    impression: requireElement<HTMLInputElement>("impression"),
    formError: requireElement<HTMLElement>("form-error"),
    jobRoot: requireElement<HTMLElement>("job-root"),
  };

  const revealed = new Set<number>();
  let latest: JobSnapshot | null = null;

  function paint(snapshot: JobSnapshot): void {
    latest = snapshot;
    els.jobRoot.innerHTML = renderJob(snapshot, { revealed });
  }

  function paintError(message: string): void {
    els.jobRoot.innerHTML = renderErrorBanner(message);
  }

  async function watch(jobId: string): Promise<void> {
    revealed.clear();
    try {
      await pollJob(client, jobId, { onUpdate: paint });
    } catch (err) {
      if (err instanceof ApiError) {
        paintError(err.detail);
      } else {
        paintError(String(err));
      }
    }
  }

  els.form.addEventListener("submit", (event) => {
    event.preventDefault();
    const check = validateReportText(els.reportText.value);
    els.formError.textContent = check.error;
    if (!check.ok) return;
    client
      .submitCase(els.reportText.value, els.impression.value)
      .then((jobId) => watch(jobId))
      .catch((err) => {
        els.formError.textContent = err instanceof ApiError ? err.detail : String(err);
      });
  });

  // Event delegation for controls that live inside re-rendered markup.
  els.jobRoot.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.classList.contains("reveal-button")) {
      const index = Number(target.dataset.question);
      if (Number.isInteger(index) && latest !== null) {
        revealed.add(index);
        paint(latest);
      }
      return;
    }
    if (target.id === "rerun-button" && latest !== null) {
      const input = els.jobRoot.querySelector<HTMLInputElement>("#keyword-input");
      if (input === null) return;
      const keywords = parseKeywordInput(input.value);
      const check = validateKeywords(keywords);
      if (!check.ok) {
        paintError(check.error);
        return;
      }
      client
        .rerunWithKeywords(latest.job_id, keywords)
        .then((res) => watch(res.job_id))
        .catch((err) => {
          paintError(err instanceof ApiError ? err.detail : String(err));
        });
    }
  });
}

// Auto-start when loaded as a page script (not under test).
if (typeof document !== "undefined" && document.getElementById("case-form") !== null) {
  startConsole();
}
