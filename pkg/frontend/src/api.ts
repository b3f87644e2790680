/**
 * Typed client for the story-generation REST API.
 *
 * All requests go through `ApiClient`; errors surface as `ApiRequestError`
 * carrying the server's structured error code. Uploads are encoded as
 * multipart/form-data by hand so the client behaves identically in the
 * browser and under node-based tests.
 */

export interface GenreInfo {
  name: string;
  description: string;
  data_driven: boolean;
}

export interface IllustrationDoc {
  event_description: string;
  positive: string;
  negative: string;
  seed: number;
  image_ref: string | null;
}

export interface ChapterDoc {
  number: number;
  title: string;
  body: string;
  illustration: IllustrationDoc | null;
}

export interface FrameDoc {
  index: number;
  caption: string | null;
  media_type: string;
  image_ref: string;
}

export interface StoryDoc {
  id: number | null;
  title: string;
  preamble: string | null;
  chapters: ChapterDoc[];
  descriptions: { frame_index: number; text: string }[];
  final_prompt: string;
  request: {
    kind: string;
    genre: string | null;
    max_frames: number;
    frames: FrameDoc[];
  } | null;
}

export interface ProgressEvent {
  timestamp: number;
  stage: string;
  detail: string | null;
}

export interface JobStatus {
  id: string;
  state: string;
  illustrating_chapter: number | null;
  error: string | null;
  progress_log: ProgressEvent[];
  story?: StoryDoc;
}

export interface LibraryEntry {
  id: number;
  title: string;
  created_at: string;
  chapter_count: number;
  thumbnail_ref: string | null;
}

export interface FramePayload {
  name: string;
  data: Blob | Uint8Array | ArrayBuffer;
  caption?: string | null;
}

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail?: unknown,
  ) {
    super(message);
    this.name = "ApiRequestError";
  }
}

interface MultipartField {
  name: string;
  value: string | Uint8Array;
  filename?: string;
  contentType?: string;
}

/** Encode form fields into a multipart/form-data body. */
export function encodeMultipart(
  fields: MultipartField[],
  boundary: string,
): Uint8Array<ArrayBuffer> {
  const encoder = new TextEncoder();
  const chunks: Uint8Array[] = [];
  for (const field of fields) {
    let head = `--${boundary}\r\nContent-Disposition: form-data; name="${field.name}"`;
    if (field.filename !== undefined) {
      head += `; filename="${field.filename}"`;
    }
    head += "\r\n";
    if (field.contentType !== undefined) {
      head += `Content-Type: ${field.contentType}\r\n`;
    }
    head += "\r\n";
    chunks.push(encoder.encode(head));
    chunks.push(
      typeof field.value === "string" ? encoder.encode(field.value) : field.value,
    );
    chunks.push(encoder.encode("\r\n"));
  }
  chunks.push(encoder.encode(`--${boundary}--\r\n`));

  const total = chunks.reduce((n, c) => n + c.length, 0);
  const body = new Uint8Array(total);
  let offset = 0;
  for (const chunk of chunks) {
    body.set(chunk, offset);
    offset += chunk.length;
  }
  return body;
}

async function toBytes(data: Blob | Uint8Array | ArrayBuffer): Promise<Uint8Array> {
  if (ArrayBuffer.isView(data)) {
    return new Uint8Array(data.buffer, data.byteOffset, data.byteLength);
  }
  if (data instanceof ArrayBuffer) return new Uint8Array(data);
  return new Uint8Array(await data.arrayBuffer());
}

function randomBoundary(): string {
  let tail = "";
  for (let i = 0; i < 24; i += 1) {
    tail += Math.floor(Math.random() * 16).toString(16);
  }
  return `----storyform${tail}`;
}

export interface CreateJobOptions {
  genre?: string | null;
  kind?: string;
}

export interface PollOptions {
  intervalMs?: number;
  onProgress?: (status: JobStatus) => void;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly token: string | null = null,
  ) {}

  /** Resolve a server media reference to a fetchable URL. */
  mediaUrl(ref: string): string {
    return `${this.baseUrl}${ref}`;
  }

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const base: Record<string, string> = { ...extra };
    if (this.token) base["Authorization"] = `Bearer ${this.token}`;
    return base;
  }

  private async request<T>(
    method: string,
    path: string,
    init: { body?: BodyInit; contentType?: string } = {},
  ): Promise<T> {
    const headers = this.headers(
      init.contentType ? { "Content-Type": init.contentType } : {},
    );
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: init.body,
    });
    const payload = await response.json().catch(() => null);
    if (!response.ok) {
      const error = payload?.error ?? {};
      throw new ApiRequestError(
        response.status,
        error.code ?? "Unknown",
        error.message ?? `request failed with status ${response.status}`,
        error.detail,
      );
    }
    return payload as T;
  }

  async listGenres(): Promise<GenreInfo[]> {
    const body = await this.request<{ genres: GenreInfo[] }>("GET", "/api/genres");
    return body.genres;
  }

  async createJob(
    frames: FramePayload[],
    options: CreateJobOptions = {},
  ): Promise<string> {
    const boundary = randomBoundary();
    const fields: MultipartField[] = [];
    for (const frame of frames) {
      fields.push({
        name: "frames",
        filename: frame.name,
        contentType: "application/octet-stream",
        value: await toBytes(frame.data),
      });
    }
    fields.push({ name: "kind", value: options.kind ?? "story" });
    if (options.genre) {
      fields.push({ name: "genre", value: options.genre });
    }
    fields.push({
      name: "captions",
      value: JSON.stringify(frames.map((f) => f.caption ?? null)),
    });
    const body = encodeMultipart(fields, boundary);
    const reply = await this.request<{ job_id: string }>("POST", "/api/jobs", {
      body,
      contentType: `multipart/form-data; boundary=${boundary}`,
    });
    return reply.job_id;
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request<JobStatus>("GET", `/api/jobs/${jobId}`);
  }

  /** Poll a job until it finishes; rejects if the job ends in Failed. */
  async pollJob(jobId: string, options: PollOptions = {}): Promise<JobStatus> {
    const interval = options.intervalMs ?? 1000;
    for (;;) {
      const status = await this.getJob(jobId);
      options.onProgress?.(status);
      if (status.state === "Done") return status;
      if (status.state === "Failed") {
        throw new ApiRequestError(
          500,
          "GenerationFailed",
          status.error ?? "generation failed",
        );
      }
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }

  async regenerate(
    storyId: string | number,
    target: "chapter" | "illustration",
    chapter: number,
  ): Promise<StoryDoc> {
    const body = await this.request<{ story: StoryDoc }>(
      "POST",
      `/api/stories/${storyId}/regenerate`,
      { body: JSON.stringify({ target, chapter }), contentType: "application/json" },
    );
    return body.story;
  }

  async saveStory(jobId: string): Promise<number> {
    const body = await this.request<{ id: number }>("POST", "/api/stories", {
      body: JSON.stringify({ job_id: jobId }),
      contentType: "application/json",
    });
    return body.id;
  }

  async getStory(storyId: number): Promise<StoryDoc> {
    const body = await this.request<{ story: StoryDoc }>(
      "GET",
      `/api/stories/${storyId}`,
    );
    return body.story;
  }

  async deleteStory(storyId: number): Promise<void> {
    await this.request<{ deleted: number }>("DELETE", `/api/stories/${storyId}`);
  }

  async listLibrary(): Promise<LibraryEntry[]> {
    const body = await this.request<{ entries: LibraryEntry[] }>(
      "GET",
      "/api/library",
    );
    return body.entries;
  }
}
