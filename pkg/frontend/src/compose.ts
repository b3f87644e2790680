/**
 * Composition screen: assemble an ordered frame sequence with optional
 * captions and an optional genre, then launch a generation job and report
 * its progress while polling.
 */

import { ApiClient, FramePayload, GenreInfo, JobStatus } from "./api.js";
import { clear, el } from "./dom.js";

export interface ComposeFrame {
  name: string;
  data: Blob | Uint8Array | ArrayBuffer;
  caption: string;
  previewUrl: string | null;
}

export interface ComposeOptions {
  pollIntervalMs?: number;
  onDone?: (jobId: string, status: JobStatus) => void;
}

function stageLabel(status: JobStatus): string {
  switch (status.state) {
    case "Pending":
      return "Queued…";
    case "Analyzing":
      return "Analyzing images…";
    case "Writing":
      return "Writing the story…";
    case "Illustrating":
      return status.illustrating_chapter
        ? `Illustrating chapter ${status.illustrating_chapter}…`
        : "Illustrating…";
    case "Done":
      return "Done";
    case "Failed":
      return `Failed: ${status.error ?? "unknown error"}`;
    default:
      return status.state;
  }
}

function previewUrl(data: Blob | Uint8Array | ArrayBuffer): string | null {
  if (!(data instanceof Blob) || typeof URL.createObjectURL !== "function") {
    return null;
  }
  return URL.createObjectURL(data);
}

export class ComposeView {
  readonly frames: ComposeFrame[] = [];
  genre = "";
  private root: HTMLElement | null = null;
  private genres: GenreInfo[] = [];
  private generating = false;
  private dragIndex: number | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly options: ComposeOptions = {},
  ) {}

  async mount(root: HTMLElement): Promise<void> {
    this.root = root;
    if (this.genres.length === 0) {
      this.genres = await this.api.listGenres();
    }
    this.render();
  }

  addFrames(payloads: FramePayload[]): void {
    for (const payload of payloads) {
      this.frames.push({
        name: payload.name,
        data: payload.data,
        caption: payload.caption ?? "",
        previewUrl: previewUrl(payload.data),
      });
    }
    this.render();
  }

  removeFrame(index: number): void {
    this.frames.splice(index, 1);
    this.render();
  }

  moveFrame(from: number, to: number): void {
    if (to < 0 || to >= this.frames.length || from === to) return;
    const [frame] = this.frames.splice(from, 1);
    this.frames.splice(to, 0, frame!);
    this.render();
  }

  setCaption(index: number, caption: string): void {
    const frame = this.frames[index];
    if (frame) frame.caption = caption;
  }

  setGenre(name: string): void {
    this.genre = name;
    this.render();
  }

  async generate(): Promise<void> {
    if (this.frames.length === 0 || this.generating) return;
    this.generating = true;
    this.render();
    try {
      const payloads: FramePayload[] = this.frames.map((f) => ({
        name: f.name,
        data: f.data,
        caption: f.caption.trim() || null,
      }));
      const jobId = await this.api.createJob(payloads, {
        genre: this.genre || null,
      });
      this.setStatus("Queued…");
      const status = await this.api.pollJob(jobId, {
        intervalMs: this.options.pollIntervalMs,
        onProgress: (s) => this.setStatus(stageLabel(s)),
      });
      this.options.onDone?.(jobId, status);
    } catch (error) {
      this.setStatus(`Failed: ${(error as Error).message}`);
    } finally {
      this.generating = false;
      const button = this.root?.querySelector<HTMLButtonElement>("#generate");
      if (button) button.disabled = this.frames.length === 0;
    }
  }

  private setStatus(text: string): void {
    const status = this.root?.querySelector("#job-status");
    if (status) status.textContent = text;
  }

  private render(): void {
    if (!this.root) return;
    const previousStatus = this.root.querySelector("#job-status")?.textContent ?? "";
    clear(this.root);

    const list = el("ol", { id: "frame-list", class: "frame-list" });
    this.frames.forEach((frame, index) => {
      list.append(this.renderFrame(frame, index));
    });

    const fileInput = el("input", {
      type: "file",
      id: "frame-input",
      accept: "image/png,image/jpeg,image/webp",
      multiple: "",
      hidden: "",
    });
    fileInput.addEventListener("change", () => {
      const files = Array.from(fileInput.files ?? []);
      this.addFrames(files.map((f) => ({ name: f.name, data: f })));
      fileInput.value = "";
    });
    const addButton = el(
      "button",
      { id: "add-frames", class: "add-frames", type: "button" },
      "+",
    );
    addButton.addEventListener("click", () => fileInput.click());

    const genreSelect = el("select", { id: "genre-select" });
    genreSelect.append(el("option", { value: "" }, "No genre (free story)"));
    for (const genre of this.genres) {
      const option = el("option", { value: genre.name }, genre.name);
      option.title = genre.description;
      genreSelect.append(option);
    }
    genreSelect.value = this.genre;
    genreSelect.addEventListener("change", () => {
      this.genre = genreSelect.value;
    });

    const generateButton = el(
      "button",
      { id: "generate", type: "button" },
      "Generate story",
    );
    generateButton.disabled = this.frames.length === 0 || this.generating;
    generateButton.addEventListener("click", () => void this.generate());

    this.root.append(
      el("h1", {}, "Compose a story"),
      el(
        "p",
        { class: "hint" },
        "Add images in the order the story should follow. Captions are optional.",
      ),
      list,
      el("div", { class: "compose-controls" }, addButton, fileInput),
      el(
        "div",
        { class: "generate-row" },
        el("label", { for: "genre-select" }, "Genre:"),
        genreSelect,
        generateButton,
      ),
      el("p", { id: "job-status", class: "job-status" }, previousStatus),
    );
  }

  private renderFrame(frame: ComposeFrame, index: number): HTMLElement {
    const caption = el("input", {
      type: "text",
      class: "caption-input",
      placeholder: "Optional caption",
      value: frame.caption,
    });
    caption.value = frame.caption;
    caption.addEventListener("input", () => this.setCaption(index, caption.value));

    const up = el("button", { type: "button", class: "move-up" }, "↑");
    up.addEventListener("click", () => this.moveFrame(index, index - 1));
    const down = el("button", { type: "button", class: "move-down" }, "↓");
    down.addEventListener("click", () => this.moveFrame(index, index + 1));
    const remove = el("button", { type: "button", class: "remove-frame" }, "×");
    remove.addEventListener("click", () => this.removeFrame(index));

    const item = el(
      "li",
      { class: "frame-item", draggable: "true", "data-index": String(index) },
      frame.previewUrl
        ? el("img", { class: "frame-thumb", src: frame.previewUrl, alt: frame.name })
        : el("span", { class: "frame-thumb placeholder" }, frame.name),
      caption,
      el("span", { class: "frame-actions" }, up, down, remove),
    );
    item.addEventListener("dragstart", () => {
      this.dragIndex = index;
    });
    item.addEventListener("dragover", (event) => event.preventDefault());
    item.addEventListener("drop", (event) => {
      event.preventDefault();
      if (this.dragIndex !== null) {
        this.moveFrame(this.dragIndex, index);
        this.dragIndex = null;
      }
    });
    return item;
  }
}
