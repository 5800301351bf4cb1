/**
 * DOM entry point: binds the session state machine to the page.
 *
 * Guards: label buttons stay disabled until the audio element reports the
 * clip playable, so nothing can be labelled unheard; keys 1/2/3/0 mirror
 * the buttons.
 */

import { ApiClient } from "./api.js";
import { labelForKey } from "./keymap.js";
import { OfflineQueue } from "./queue.js";
import { AnnotationSession, SessionState } from "./session.js";
import { LABEL_VALUES, LabelValue } from "./types.js";

const BUTTON_LABELS: Record<LabelValue, string> = {
  low: "1 · Low",
  medium: "2 · Medium",
  high: "3 · High",
  not_clear: "0 · Not clear",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function boot(): void {
  const api = new ApiClient("");
  const queue = new OfflineQueue();
  const session = new AnnotationSession(api, queue, { onChange: render });

  const raterForm = el<HTMLFormElement>("rater-form");
  const raterInput = el<HTMLInputElement>("rater-id");
  const stage = el<HTMLDivElement>("stage");
  const audio = el<HTMLAudioElement>("player");
  const buttonsBox = el<HTMLDivElement>("buttons");
  const progressBar = el<HTMLProgressElement>("progress-bar");
  const progressText = el<HTMLSpanElement>("progress-text");
  const banner = el<HTMLDivElement>("banner");
  const errorLine = el<HTMLDivElement>("error-line");
  const clipTitle = el<HTMLSpanElement>("clip-title");

  const buttons = new Map<LabelValue, HTMLButtonElement>();
  for (const value of LABEL_VALUES) {
    const b = document.createElement("button");
    b.textContent = BUTTON_LABELS[value];
    b.disabled = true;
    b.addEventListener("click", () => void session.submit(value));
    buttonsBox.appendChild(b);
    buttons.set(value, b);
  }

  raterForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void session.start(raterInput.value).catch((err) => {
      errorLine.textContent = String(err);
    });
  });

  audio.addEventListener("canplaythrough", () => session.markAudioReady());

  document.addEventListener("keydown", (ev) => {
    if (ev.target instanceof HTMLInputElement) return;
    const value = labelForKey(ev.key);
    if (value && session.canSubmit()) {
      ev.preventDefault();
      void session.submit(value);
    }
  });

  window.addEventListener("online", () => void session.retryNow());
  el<HTMLButtonElement>("retry").addEventListener("click", () => void session.retryNow());

  let lastClip: string | null = null;

  function render(state: SessionState): void {
    raterForm.hidden = state.raterId !== null;
    stage.hidden = state.raterId === null;

    if (state.clipId !== lastClip) {
      lastClip = state.clipId;
      if (state.clipId) {
        audio.src = session.audioUrl() as string;
        audio.load();
        clipTitle.textContent = state.clipId;
      } else {
        audio.removeAttribute("src");
        clipTitle.textContent = state.finished ? "all clips done — thank you" : "…";
      }
    }

    const enable = session.canSubmit();
    for (const b of buttons.values()) b.disabled = !enable;

    progressBar.max = Math.max(state.totalClips, 1);
    progressBar.value = state.done;
    progressText.textContent = `${state.done} / ${state.totalClips}`;

    banner.hidden = !state.offline;
    banner.textContent = state.offline
      ? `backend unreachable — ${state.queued} label(s) queued, retrying…`
      : "";
    errorLine.textContent = state.lastError ?? "";
  }

  render(session.getState());
}

boot();
