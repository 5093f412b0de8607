import { candidateViews, verdictControls } from "./controls.js";
import { AnnotationSession, SessionState } from "./session.js";

/** Render the session state into a container; browser-only module. */
export function render(root: HTMLElement, session: AnnotationSession, state: SessionState): void {
  root.textContent = "";
  root.appendChild(progressBar(state));
  switch (state.phase) {
    case "loading":
      root.appendChild(note("Loading next task..."));
      return;
    case "connection-error": {
      root.appendChild(note("Could not reach the annotation service."));
      const retry = button("Retry", () => void session.retry());
      retry.className = "retry";
      root.appendChild(retry);
      return;
    }
    case "done": {
      const panel = div("done");
      panel.appendChild(heading("All tasks annotated"));
      panel.appendChild(note("Thank you. There is nothing left in your queue."));
      root.appendChild(panel);
      return;
    }
    case "task":
      break;
  }
  const task = state.task;
  if (task === null) {
    return;
  }

  const card = div("task");
  card.appendChild(heading(task.prompt));

  const source = div("source");
  source.appendChild(label("Source"));
  source.appendChild(paragraph(task.source));
  card.appendChild(source);

  for (const candidate of candidateViews(task)) {
    const panel = div("candidate");
    panel.appendChild(label(candidate.slot));
    panel.appendChild(paragraph(candidate.text));
    card.appendChild(panel);
  }

  const controls = div("controls");
  for (const control of verdictControls(task)) {
    const cell = div("control");
    const btn = button(control.label, () => void session.submit(control.verdict));
    btn.disabled = state.submitting;
    cell.appendChild(btn);
    if (control.caption !== "") {
      const caption = div("caption");
      caption.textContent = control.caption;
      cell.appendChild(caption);
    }
    controls.appendChild(cell);
  }
  card.appendChild(controls);

  if (state.error !== null) {
    const problem = div("error");
    problem.textContent = state.error;
    card.appendChild(problem);
  }
  root.appendChild(card);
}

function progressBar(state: SessionState): HTMLElement {
  const bar = div("progress");
  if (state.progress !== null) {
    bar.textContent = `${state.progress.judgments} of ${state.progress.tasks} judgments recorded`;
  } else {
    bar.textContent = `${state.submitted} submitted this session`;
  }
  return bar;
}

function div(className: string): HTMLDivElement {
  const el = document.createElement("div");
  el.className = className;
  return el;
}

function heading(text: string): HTMLHeadingElement {
  const el = document.createElement("h2");
  el.textContent = text;
  return el;
}

function label(text: string): HTMLElement {
  const el = document.createElement("span");
  el.className = "label";
  el.textContent = text;
  return el;
}

function note(text: string): HTMLParagraphElement {
  const el = document.createElement("p");
  el.className = "note";
  el.textContent = text;
  return el;
}

function paragraph(text: string): HTMLParagraphElement {
  const el = document.createElement("p");
  el.textContent = text;
  return el;
}

function button(text: string, onClick: () => void): HTMLButtonElement {
  const el = document.createElement("button");
  el.type = "button";
  el.textContent = text;
  el.addEventListener("click", onClick);
  return el;
}
