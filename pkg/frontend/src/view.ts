/**
 * Pure HTML renderers: every function maps a job snapshot (plus explicit UI
 * state such as which answers are revealed) to a markup string. Nothing here
 * invents values — the output is a projection of the snapshot JSON.
 */
import { JobSnapshot, Mcq, STAGES, StageStatus } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const STAGE_LABELS: Record<string, string> = {
  decompose: "Keywords",
  retrieve_local: "Textbook",
  retrieve_api: "Literature",
  summarize: "Summaries",
  rerank: "Rerank",
  compose: "Compose",
  generate: "Generate",
  parse: "Parse",
};

export function renderStageBadges(stages: Record<string, StageStatus>): string {
  const badges = STAGES.map((stage) => {
    const status = stages[stage] ?? "pending";
    const label = STAGE_LABELS[stage] ?? stage;
    const tooltip =
      status === "failed" ? ` title="${escapeHtml(stage)} failed; the module may be degraded"` : "";
    return `<span class="badge badge-${status}" data-stage="${stage}"${tooltip}>${escapeHtml(label)}: ${status}</span>`;
  });
  return `<div class="stage-badges">${badges.join("")}</div>`;
}

export function renderKeywords(keywords: string[], editable: boolean): string {
  const chips = keywords
    .map((k) => `<li class="keyword-chip">${escapeHtml(k)}</li>`)
    .join("");
  const editor = editable
    ? `<div class="keyword-editor">
        <input id="keyword-input" type="text" value="${escapeHtml(keywords.join(", "))}" />
        <button id="rerun-button" type="button">Re-run with edited keywords</button>
      </div>`
    : `<div class="keyword-editor">
        <input id="keyword-input" type="text" disabled value="${escapeHtml(keywords.join(", "))}" />
        <button id="rerun-button" type="button" disabled>Re-run with edited keywords</button>
      </div>`;
  return `<section class="keywords"><h2>Keywords</h2><ul>${chips}</ul>${editor}</section>`;
}

export function renderEvidenceCards(
  evidence: { title: string; source: string; url: string; abstract: string; score?: number }[],
): string {
  if (evidence.length === 0) {
    return `<section class="evidence"><h2>Evidence</h2><p class="empty">No evidence retrieved.</p></section>`;
  }
  const cards = evidence
    .map((item) => {
      const score =
        item.score === undefined
          ? ""
          : `<span class="score">score ${item.score.toFixed(3)}</span>`;
      const snippet =
        item.abstract.length > 280 ? `${item.abstract.slice(0, 280)}…` : item.abstract;
      return `<article class="evidence-card">
        <h3><a href="${escapeHtml(item.url)}" target="_blank" rel="noopener">${escapeHtml(item.title)}</a></h3>
        <p class="meta"><span class="source">${escapeHtml(item.source)}</span>${score}</p>
        <p class="abstract">${escapeHtml(snippet)}</p>
      </article>`;
    })
    .join("");
  return `<section class="evidence"><h2>Evidence</h2>${cards}</section>`;
}

export function renderSummaries(
  summaries: { keyword: string; summary: string; source_page_ids: number[] }[],
): string {
  if (summaries.length === 0) {
    return `<section class="summaries"><h2>Textbook Summaries</h2><p class="empty">No summaries.</p></section>`;
  }
  const cards = summaries
    .map(
      (s) => `<article class="summary-card">
        <h3>${escapeHtml(s.keyword)}</h3>
        <p>${escapeHtml(s.summary)}</p>
        <p class="meta">pages: ${s.source_page_ids.join(", ")}</p>
      </article>`,
    )
    .join("");
  return `<section class="summaries"><h2>Textbook Summaries</h2>${cards}</section>`;
}

export function renderEducation(sections: Record<string, string>, fullText: string): string {
  const panels = Object.entries(sections)
    .filter(([, body]) => body.trim().length > 0)
    .map(
      ([keyword, body]) => `<article class="education-section">
        <h3>${escapeHtml(keyword)}</h3>
        <div class="body">${escapeHtml(body)}</div>
      </article>`,
    )
    .join("");
  const fallback =
    panels.length > 0 ? "" : `<pre class="education-raw">${escapeHtml(fullText)}</pre>`;
  return `<section class="education"><h2>Educational Material</h2>${panels}${fallback}</section>`;
}

/**
 * MCQ cards. The answer and explanation are only present in the markup for
 * questions whose index is in `revealed`; hiding is structural, not CSS, so
 * an unrevealed answer cannot leak through the DOM.
 */
export function renderMcqCards(mcqs: Mcq[], revealed: ReadonlySet<number>): string {
  if (mcqs.length === 0) {
    return `<section class="mcqs"><h2>Assessment Questions</h2><p class="empty">No questions.</p></section>`;
  }
  const letters = ["A", "B", "C", "D"] as const;
  const cards = mcqs
    .map((q, index) => {
      const options = q.options
        .map((opt, i) => `<li><strong>${letters[i]}.</strong> ${escapeHtml(opt)}</li>`)
        .join("");
      const reveal = revealed.has(index)
        ? `<div class="answer" data-question="${index}">
            <p><strong>Answer: ${q.answer}</strong></p>
            <p>${escapeHtml(q.explanation)}</p>
          </div>`
        : `<button class="reveal-button" data-question="${index}" type="button">Reveal answer</button>`;
      return `<article class="mcq-card" data-question="${index}">
        <p class="mcq-keyword">${escapeHtml(q.keyword)}</p>
        <p class="stem">${escapeHtml(q.stem)}</p>
        <ol class="options">${options}</ol>
        ${reveal}
      </article>`;
    })
    .join("");
  return `<section class="mcqs"><h2>Assessment Questions</h2>${cards}</section>`;
}

export function renderErrorBanner(message: string): string {
  if (!message) return "";
  return `<div class="error-banner" role="alert">${escapeHtml(message)}</div>`;
}

export interface JobUiState {
  revealed: ReadonlySet<number>;
}

/** Full job page: badges, keywords, then the module panels once present. */
export function renderJob(snapshot: JobSnapshot, ui: JobUiState): string {
  const parts: string[] = [];
  parts.push(
    `<header class="job-header"><h1>Job ${escapeHtml(snapshot.job_id)}</h1>` +
      `<span class="job-status job-status-${snapshot.status}">${snapshot.status}</span></header>`,
  );
  parts.push(renderErrorBanner(snapshot.error));
  if (snapshot.no_keywords) {
    parts.push(`<div class="notice">No diagnosis keywords were found in this report.</div>`);
  }
  parts.push(renderStageBadges(snapshot.stages));
  const editable = snapshot.status === "done" || snapshot.status === "failed";
  parts.push(renderKeywords(snapshot.keywords, editable));
  if (snapshot.module) {
    parts.push(renderEvidenceCards(snapshot.evidence ?? snapshot.module.evidence));
    parts.push(renderSummaries(snapshot.summaries ?? snapshot.module.summaries));
    parts.push(renderEducation(snapshot.module.education_sections, snapshot.module.education_text));
    parts.push(renderMcqCards(snapshot.module.mcqs, ui.revealed));
  }
  return parts.filter(Boolean).join("\n");
}
