/**
 * Poll a job snapshot at a fixed cadence until it reaches a terminal state.
 *
 * The server already guarantees monotone snapshots, but the poller re-applies
 * the same forward-only merge as a client-side invariant so a badge can never
 * flicker backwards even against a misbehaving proxy or reordered response.
 */
import { GatewayClient } from "./api.js";
import { isTerminal, JobSnapshot, StageStatus, STATUS_RANK } from "./types.js";

export type SleepLike = (ms: number) => Promise<void>;

const realSleep: SleepLike = (ms) =>
  new Promise((resolve) => setTimeout(resolve, ms));

/** Merge a fresh snapshot over the previous one, never regressing a stage. */
export function mergeSnapshots(
  previous: JobSnapshot | null,
  next: JobSnapshot,
): JobSnapshot {
  if (previous === null) return next;
  const stages: Record<string, StageStatus> = { ...next.stages };
  for (const [stage, prevStatus] of Object.entries(previous.stages)) {
    const nextStatus = stages[stage] ?? "pending";
    if (STATUS_RANK[nextStatus] < STATUS_RANK[prevStatus]) {
      stages[stage] = prevStatus;
    }
  }
  return { ...next, stages };
}

export interface PollOptions {
  intervalMs?: number;
  onUpdate?: (snapshot: JobSnapshot) => void;
  sleep?: SleepLike;
  maxPolls?: number;
}

/**
 * Resolve with the terminal snapshot; every intermediate (merged) snapshot is
 * reported through onUpdate. Rejects on HTTP errors (e.g. 404 unknown job).
 */
export async function pollJob(
  client: GatewayClient,
  jobId: string,
  options: PollOptions = {},
): Promise<JobSnapshot> {
  const intervalMs = options.intervalMs ?? 1000;
  const sleep = options.sleep ?? realSleep;
  const maxPolls = options.maxPolls ?? Infinity;
  let merged: JobSnapshot | null = null;
  for (let i = 0; i < maxPolls; i += 1) {
    const snapshot = await client.getJob(jobId);
    merged = mergeSnapshots(merged, snapshot);
    options.onUpdate?.(merged);
    if (isTerminal(merged)) return merged;
    await sleep(intervalMs);
  }
  throw new Error(`job ${jobId} did not finish within ${maxPolls} polls`);
}
