import { Judgment, Progress, SubmitResult, TaskPayload, parseTask } from "./types.js";

/** The three service endpoints the client is allowed to touch. */
export interface ApiClient {
  /** Next unjudged task for the annotator, or null once the queue is drained. */
  nextTask(annotator: string): Promise<TaskPayload | null>;
  submit(judgment: Judgment): Promise<SubmitResult>;
  progress(): Promise<Progress>;
}

/** fetch-backed client; `base` is "" in the browser (same-origin bundle). */
export class HttpApi implements ApiClient {
  constructor(private readonly base: string = "") {}

  async nextTask(annotator: string): Promise<TaskPayload | null> {
    const url = `${this.base}/api/tasks/next?annotator=${encodeURIComponent(annotator)}`;
    const res = await fetch(url);
    if (res.status === 204) {
      return null;
    }
    if (!res.ok) {
      throw new Error(`task fetch failed with status ${res.status}`);
    }
    return parseTask(await res.json());
  }

  async submit(judgment: Judgment): Promise<SubmitResult> {
    const res = await fetch(`${this.base}/api/judgments`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(judgment),
    });
    if (res.status === 201) {
      const body = (await res.json()) as { judgments: number };
      return { ok: true, judgments: body.judgments };
    }
    let reason = `status ${res.status}`;
    try {
      const body = (await res.json()) as { error?: string };
      if (body.error) {
        reason = body.error;
      }
    } catch {
      // non-JSON error body; keep the status text
    }
    return { ok: false, status: res.status, reason };
  }

  async progress(): Promise<Progress> {
    const res = await fetch(`${this.base}/api/progress`);
    if (!res.ok) {
      throw new Error(`progress fetch failed with status ${res.status}`);
    }
    return (await res.json()) as Progress;
  }
}
