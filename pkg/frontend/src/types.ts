/**
 * Wire types for the gateway HTTP API, validated with zod so the console
 * never renders a malformed snapshot.
 */
import { z } from "zod";

export const STAGES = [
  "decompose",
  "retrieve_local",
  "retrieve_api",
  "summarize",
  "rerank",
  "compose",
  "generate",
  "parse",
] as const;

export type Stage = (typeof STAGES)[number];

export const StageStatus = z.enum(["pending", "running", "done", "failed", "skipped"]);
export type StageStatus = z.infer<typeof StageStatus>;

/** Rank used to keep badges monotone: a finished stage never reverts. */
export const STATUS_RANK: Record<StageStatus, number> = {
  pending: 0,
  running: 1,
  done: 2,
  failed: 2,
  skipped: 2,
};

export const EvidenceItem = z.object({
  title: z.string(),
  abstract: z.string(),
  url: z.string(),
  source: z.string(),
  external_id: z.string(),
  year: z.number().int().nullable().optional(),
  score: z.number().optional(),
});
export type EvidenceItem = z.infer<typeof EvidenceItem>;

export const TextbookSummary = z.object({
  keyword: z.string(),
  summary: z.string(),
  source_page_ids: z.array(z.number().int()),
});
export type TextbookSummary = z.infer<typeof TextbookSummary>;

export const Mcq = z.object({
  keyword: z.string(),
  stem: z.string(),
  options: z.array(z.string()).length(4),
  answer: z.enum(["A", "B", "C", "D"]),
  explanation: z.string(),
});
export type Mcq = z.infer<typeof Mcq>;

export const LearningModule = z.object({
  case_id: z.string(),
  dataset_tag: z.string().optional().default(""),
  keywords: z.array(z.string()),
  evidence: z.array(EvidenceItem),
  summaries: z.array(TextbookSummary),
  education_text: z.string(),
  education_sections: z.record(z.string(), z.string()),
  mcqs: z.array(Mcq),
  timings: z.record(z.string(), z.number()).optional().default({}),
  status: z.string().optional().default("ok"),
});
export type LearningModule = z.infer<typeof LearningModule>;

export const JobSnapshot = z.object({
  job_id: z.string(),
  status: z.enum(["pending", "running", "done", "failed"]),
  case_id: z.string(),
  stages: z.record(z.string(), StageStatus),
  keywords: z.array(z.string()),
  error: z.string(),
  no_keywords: z.boolean(),
  module: LearningModule.optional(),
  evidence: z.array(EvidenceItem).optional(),
  summaries: z.array(TextbookSummary).optional(),
});
export type JobSnapshot = z.infer<typeof JobSnapshot>;

export const Health = z.object({
  status: z.string(),
  version: z.string(),
  mock: z.boolean(),
  jobs: z.number().int(),
});
export type Health = z.infer<typeof Health>;

export const SubmitResponse = z.object({ job_id: z.string() });
export type SubmitResponse = z.infer<typeof SubmitResponse>;

export const RerunResponse = z.object({
  job_id: z.string(),
  parent_job_id: z.string(),
});
export type RerunResponse = z.infer<typeof RerunResponse>;

export function isTerminal(snapshot: JobSnapshot): boolean {
  return snapshot.status === "done" || snapshot.status === "failed";
}
