import { ApiClient } from "./api.js";
import { Progress, TaskPayload, Verdict, isAllowedVerdict } from "./types.js";

export type SessionPhase = "loading" | "task" | "done" | "connection-error";

export interface SessionState {
  phase: SessionPhase;
  task: TaskPayload | null;
  /** True while a submission is on the wire; controls must be disabled. */
  submitting: boolean;
  /** Rejection or validation message for the current task, if any. */
  error: string | null;
  progress: Progress | null;
  /** Judgments this annotator has submitted in this session. */
  submitted: number;
}

/**
 * Drives one annotator through the task queue. All transitions funnel
 * through `setState` so a renderer can subscribe and stay in sync.
 */
export class AnnotationSession {
  private state: SessionState = {
    phase: "loading",
    task: null,
    submitting: false,
    error: null,
    progress: null,
    submitted: 0,
  };

  constructor(
    private readonly api: ApiClient,
    readonly annotator: string,
    private readonly onChange: (state: SessionState) => void = () => {},
  ) {}

  getState(): SessionState {
    return this.state;
  }

  private setState(patch: Partial<SessionState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  /** Fetch the next task; 204 means the queue is drained. */
  async start(): Promise<void> {
    this.setState({ phase: "loading", task: null, error: null });
    let task: TaskPayload | null;
    try {
      task = await this.api.nextTask(this.annotator);
    } catch {
      this.setState({ phase: "connection-error" });
      return;
    }
    if (task === null) {
      await this.refreshProgress();
      this.setState({ phase: "done", task: null });
      return;
    }
    this.setState({ phase: "task", task });
  }

  /** Re-attempt after a connection failure, keeping session counts. */
  async retry(): Promise<void> {
    await this.start();
  }

  /**
   * Submit a verdict for the current task. No-ops while another submission
   * is in flight, so a double click cannot produce two POSTs. Verdicts
   * outside the task's declared domain are rejected without a request.
   */
  async submit(verdict: Verdict): Promise<void> {
    const task = this.state.task;
    if (this.state.phase !== "task" || task === null || this.state.submitting) {
      return;
    }
    if (!isAllowedVerdict(task, verdict)) {
      this.setState({ error: `verdict ${JSON.stringify(verdict)} is not allowed here` });
      return;
    }
    this.setState({ submitting: true, error: null });
    let result;
    try {
      result = await this.api.submit({
        task_id: task.task_id,
        annotator: this.annotator,
        verdict,
      });
    } catch {
      this.setState({ submitting: false, phase: "connection-error" });
      return;
    }
    if (!result.ok) {
      if (result.status === 409) {
        // someone already judged it under this name; advance, keep the notice
        this.setState({ submitting: false });
        await this.start();
        if (this.state.phase === "task") {
          this.setState({ error: result.reason });
        }
        return;
      }
      this.setState({ submitting: false, error: result.reason });
      return;
    }
    this.setState({ submitting: false, submitted: this.state.submitted + 1 });
    await this.refreshProgress();
    await this.start();
  }

  private async refreshProgress(): Promise<void> {
    try {
      const progress = await this.api.progress();
      this.setState({ progress });
    } catch {
      // progress is advisory; do not fail the session over it
    }
  }
}
