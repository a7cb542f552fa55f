import { describe, expect, it } from "vitest";

import { isTerminal, JobSnapshot, Mcq, STAGES } from "../src/types.js";
import { doneSnapshot, loadFixture, rerunSnapshot } from "./helpers.js";

describe("JobSnapshot schema", () => {
  it("parses the recorded done snapshot", () => {
    const snap = doneSnapshot();
    expect(snap.status).toBe("done");
    expect(snap.keywords).toEqual(["acute appendicitis", "colonic diverticulosis"]);
    expect(snap.module).toBeDefined();
    expect(snap.module!.mcqs.length).toBeGreaterThanOrEqual(1);
    for (const stage of STAGES) {
      expect(snap.stages[stage]).toBe("done");
    }
  });

  it("parses the recorded keyword-rerun snapshot", () => {
    const snap = rerunSnapshot();
    expect(snap.keywords).toEqual(["acute appendicitis"]);
    expect(snap.module!.keywords).toEqual(["acute appendicitis"]);
  });

  it("rejects a snapshot with an unknown stage status", () => {
    const raw = loadFixture("snapshot_done.json") as Record<string, unknown>;
    const broken = { ...raw, stages: { decompose: "exploded" } };
    expect(() => JobSnapshot.parse(broken)).toThrow();
  });

  it("rejects an MCQ without exactly four options", () => {
    expect(() =>
      Mcq.parse({
        keyword: "k",
        stem: "s?",
        options: ["a", "b", "c"],
        answer: "A",
        explanation: "",
      }),
    ).toThrow();
  });

  it("isTerminal covers done and failed only", () => {
    const snap = doneSnapshot();
    expect(isTerminal(snap)).toBe(true);
    expect(isTerminal({ ...snap, status: "failed" })).toBe(true);
    expect(isTerminal({ ...snap, status: "running" })).toBe(false);
    expect(isTerminal({ ...snap, status: "pending" })).toBe(false);
  });
});
