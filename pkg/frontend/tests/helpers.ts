import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { JobSnapshot } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export function loadFixture(name: string): unknown {
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8"));
}

export function doneSnapshot(): JobSnapshot {
  return JobSnapshot.parse(loadFixture("snapshot_done.json"));
}

export function rerunSnapshot(): JobSnapshot {
  return JobSnapshot.parse(loadFixture("snapshot_rerun.json"));
}

/** Minimal Response stand-in for driving GatewayClient without a server. */
export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
