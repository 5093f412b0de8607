import { HttpApi } from "./api.js";
import { render } from "./dom.js";
import { AnnotationSession } from "./session.js";

const STORAGE_KEY = "annotator";

/** Annotator id from ?annotator=..., else localStorage, else a prompt. */
function resolveAnnotator(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("annotator");
  if (fromQuery !== null && fromQuery.trim() !== "") {
    window.localStorage.setItem(STORAGE_KEY, fromQuery.trim());
    return fromQuery.trim();
  }
  const stored = window.localStorage.getItem(STORAGE_KEY);
  if (stored !== null && stored.trim() !== "") {
    return stored;
  }
  const typed = window.prompt("Annotator name:")?.trim() ?? "";
  const name = typed === "" ? "anonymous" : typed;
  window.localStorage.setItem(STORAGE_KEY, name);
  return name;
}

function main(): void {
  const root = document.getElementById("app");
  if (root === null) {
    throw new Error("missing #app container");
  }
  const annotator = resolveAnnotator();
  const session = new AnnotationSession(new HttpApi(), annotator, (state) => {
    render(root, session, state);
  });
  void session.start();
}

main();
