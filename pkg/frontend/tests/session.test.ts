import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { AnnotationSession } from "../src/session.js";
import { Judgment, Progress, SubmitResult, TaskPayload } from "../src/types.js";

function meaningTask(id: string): TaskPayload {
  return {
    task_id: id,
    kind: "meaning-AB",
    prompt: "Which transferred sentence maintains the same semantic intent of the source sentence?",
    source: "w0 w1 w2",
    candidates: { A: "w0 w1 t", B: "w0 w1 r" },
    verdicts: ["A", "=", "B"],
  };
}

function fluencyTask(id: string): TaskPayload {
  return {
    task_id: id,
    kind: "fluency",
    prompt: "Rate the fluency of the sentence from 1 (unreadable) to 4 (perfect).",
    source: "w0 w1 w2",
    candidates: { A: "w0 w1 t" },
    verdicts: [1, 2, 3, 4],
  };
}

/** Scripted ApiClient that records every call. */
class StubApi implements ApiClient {
  submitted: Judgment[] = [];
  progressCalls = 0;
  submitResult: SubmitResult = { ok: true, judgments: 1 };
  failNext = false;
  failSubmit = false;
  /** When set, submit() blocks until release() is called. */
  private gate: (() => void) | null = null;
  gated = false;

  constructor(private queue: (TaskPayload | null)[]) {}

  async nextTask(): Promise<TaskPayload | null> {
    if (this.failNext) {
      throw new Error("connection refused");
    }
    if (this.queue.length === 0) {
      return null;
    }
    return this.queue.shift() ?? null;
  }

  async submit(judgment: Judgment): Promise<SubmitResult> {
    if (this.failSubmit) {
      throw new Error("connection reset");
    }
    this.submitted.push(judgment);
    if (this.gated) {
      await new Promise<void>((resolve) => {
        this.gate = resolve;
      });
    }
    return this.submitResult;
  }

  release(): void {
    this.gate?.();
    this.gate = null;
  }

  async progress(): Promise<Progress> {
    this.progressCalls += 1;
    return { tasks: 2, judgments: this.submitted.length, annotators: {} };
  }
}

describe("AnnotationSession", () => {
  it("loads the first task on start", async () => {
    const api = new StubApi([meaningTask("t1")]);
    const session = new AnnotationSession(api, "alice");
    await session.start();
    expect(session.getState().phase).toBe("task");
    expect(session.getState().task?.task_id).toBe("t1");
  });

  it("reaches the completion screen when the queue drains", async () => {
    const api = new StubApi([meaningTask("t1")]);
    const session = new AnnotationSession(api, "alice");
    await session.start();
    await session.submit("A");
    expect(session.getState().phase).toBe("done");
    expect(session.getState().submitted).toBe(1);
  });

  it("sends exactly task_id, annotator, and verdict", async () => {
    const api = new StubApi([meaningTask("t1")]);
    const session = new AnnotationSession(api, "alice");
    await session.start();
    await session.submit("=");
    expect(api.submitted).toHaveLength(1);
    expect(api.submitted[0]).toEqual({ task_id: "t1", annotator: "alice", verdict: "=" });
    expect(Object.keys(api.submitted[0]).sort()).toEqual(["annotator", "task_id", "verdict"]);
  });

  it("refreshes progress after every accepted judgment", async () => {
    const api = new StubApi([meaningTask("t1"), fluencyTask("t2")]);
    const session = new AnnotationSession(api, "alice");
    await session.start();
    await session.submit("A");
    expect(api.progressCalls).toBe(1);
    expect(session.getState().progress).toEqual({ tasks: 2, judgments: 1, annotators: {} });
    await session.submit(3);
    expect(session.getState().progress?.judgments).toBe(2);
  });

  it("ignores a second click while a submission is in flight", async () => {
    const api = new StubApi([meaningTask("t1")]);
    api.gated = true;
    const session = new AnnotationSession(api, "alice");
    await session.start();
    const first = session.submit("A");
    const second = session.submit("B");
    expect(session.getState().submitting).toBe(true);
    api.release();
    await Promise.all([first, second]);
    expect(api.submitted).toHaveLength(1);
    expect(api.submitted[0].verdict).toBe("A");
  });

  it("rejects fluency scores outside 1 to 4 without a request", async () => {
    const api = new StubApi([fluencyTask("t1")]);
    const session = new AnnotationSession(api, "alice");
    await session.start();
    for (const bad of [0, 5, -1, 2.5, "A" as const]) {
      await session.submit(bad);
      expect(session.getState().error).toMatch(/not allowed/);
      expect(session.getState().phase).toBe("task");
    }
    expect(api.submitted).toHaveLength(0);
    await session.submit(4);
    expect(api.submitted).toHaveLength(1);
  });

  it("rejects meaning verdicts outside the declared set", async () => {
    const api = new StubApi([meaningTask("t1")]);
    const session = new AnnotationSession(api, "alice");
    await session.start();
    await session.submit("C" as never);
    await session.submit(2);
    expect(api.submitted).toHaveLength(0);
    expect(session.getState().task?.task_id).toBe("t1");
  });

  it("keeps the task on a 400 so the annotator can retry", async () => {
    const api = new StubApi([meaningTask("t1")]);
    api.submitResult = { ok: false, status: 400, reason: "bad verdict" };
    const session = new AnnotationSession(api, "alice");
    await session.start();
    await session.submit("A");
    expect(session.getState().phase).toBe("task");
    expect(session.getState().task?.task_id).toBe("t1");
    expect(session.getState().error).toBe("bad verdict");
    expect(session.getState().submitting).toBe(false);
  });

  it("surfaces a 409 and advances past the already judged task", async () => {
    const api = new StubApi([meaningTask("t1"), meaningTask("t2")]);
    api.submitResult = { ok: false, status: 409, reason: "already judged" };
    const session = new AnnotationSession(api, "alice");
    await session.start();
    await session.submit("A");
    expect(session.getState().task?.task_id).toBe("t2");
    expect(session.getState().error).toBe("already judged");
    expect(session.getState().submitted).toBe(0);
  });

  it("offers a retry after a connection failure and recovers", async () => {
    const api = new StubApi([meaningTask("t1")]);
    api.failNext = true;
    const session = new AnnotationSession(api, "alice");
    await session.start();
    expect(session.getState().phase).toBe("connection-error");
    api.failNext = false;
    await session.retry();
    expect(session.getState().phase).toBe("task");
    expect(session.getState().task?.task_id).toBe("t1");
  });

  it("treats a failed POST as a connection error without losing counts", async () => {
    const api = new StubApi([meaningTask("t1")]);
    api.failSubmit = true;
    const session = new AnnotationSession(api, "alice");
    await session.start();
    await session.submit("A");
    expect(session.getState().phase).toBe("connection-error");
    expect(session.getState().submitting).toBe(false);
    expect(session.getState().submitted).toBe(0);
  });

  it("notifies the renderer on every state change", async () => {
    const api = new StubApi([meaningTask("t1")]);
    const phases: string[] = [];
    const session = new AnnotationSession(api, "alice", (state) => {
      phases.push(state.phase);
    });
    await session.start();
    await session.submit("A");
    expect(phases[0]).toBe("loading");
    expect(phases).toContain("task");
    expect(phases[phases.length - 1]).toBe("done");
  });
});
