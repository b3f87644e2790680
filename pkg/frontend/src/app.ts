/**
 * Application shell: a hash router switching between the compose, story,
 * and library screens.
 *
 * Routes:
 *   #/compose        composition screen (default)
 *   #/job/{id}       a running or finished generation job
 *   #/story/{id}     a saved story permalink
 *   #/library        saved stories
 */

import { ApiClient, JobStatus, StoryDoc } from "./api.js";
import { clear, el } from "./dom.js";
import { ComposeView } from "./compose.js";
import { LibraryView } from "./library.js";
import { StoryView } from "./story.js";

export interface AppOptions {
  pollIntervalMs?: number;
}

export class App {
  readonly compose: ComposeView;
  readonly story: StoryView;
  readonly library: LibraryView;
  private readonly onHashChange = () => void this.route();

  constructor(
    private readonly root: HTMLElement,
    readonly api: ApiClient,
    options: AppOptions = {},
  ) {
    this.compose = new ComposeView(api, {
      pollIntervalMs: options.pollIntervalMs,
      onDone: (jobId, status) => this.showJobResult(jobId, status),
    });
    this.story = new StoryView(api, (storyId) => {
      window.location.hash = `#/story/${storyId}`;
    });
    this.library = new LibraryView(api);
  }

  start(): void {
    window.addEventListener("hashchange", this.onHashChange);
    void this.route();
  }

  stop(): void {
    window.removeEventListener("hashchange", this.onHashChange);
  }

  /** Render the screen for the current location hash. */
  async route(): Promise<void> {
    const hash = window.location.hash || "#/compose";
    const [, screen, arg] = hash.split("/");
    try {
      if (screen === "library") {
        await this.library.mount(this.screenRoot("library"));
      } else if (screen === "story" && arg) {
        const storyId = Number(arg);
        const story = await this.api.getStory(storyId);
        this.story.mount(this.screenRoot("story"), story, { savedId: storyId });
      } else if (screen === "job" && arg) {
        const status = await this.api.getJob(arg);
        if (status.story) {
          this.showJobResult(arg, status);
        } else {
          this.renderMessage(`Job ${arg} is ${status.state}.`);
        }
      } else {
        await this.compose.mount(this.screenRoot("compose"));
      }
    } catch (error) {
      this.renderMessage(`Error: ${(error as Error).message}`);
    }
  }

  private showJobResult(jobId: string, status: JobStatus): void {
    const story = status.story as StoryDoc;
    this.story.mount(this.screenRoot("story"), story, { jobId });
  }

  private screenRoot(name: string): HTMLElement {
    clear(this.root);
    const screen = el("div", { id: `screen-${name}`, class: "screen" });
    this.root.append(screen);
    return screen;
  }

  private renderMessage(text: string): void {
    clear(this.root);
    this.root.append(el("p", { class: "app-message" }, text));
  }
}

export function startApp(): App {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const app = new App(root, new ApiClient(""));
  app.start();
  return app;
}
