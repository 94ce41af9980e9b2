import type {
  ChatCompletionResponse,
  ChatMessagePayload,
  FrameEvent,
  ProcessImageResponse,
} from "./types.js";

export class GatewayHttpError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail: string
  ) {
    super(`${status} ${code}: ${detail}`);
  }
}

type FetchLike = typeof fetch;

export class GatewayClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = fetch
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      let code = "error";
      let detail = response.statusText;
      try {
        const parsed = await response.json();
        code = parsed.error ?? code;
        detail = parsed.detail ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new GatewayHttpError(response.status, code, detail);
    }
    return (await response.json()) as T;
  }

  loadModel(provider?: string): Promise<{ loaded: boolean }> {
    return this.post("/load_model", provider ? { provider } : {});
  }

  processImage(
    imageBase64: string,
    prompt: string,
    sessionId?: string | null
  ): Promise<ProcessImageResponse> {
    const body: Record<string, unknown> = { image: imageBase64, prompt };
    if (sessionId) body.session_id = sessionId;
    return this.post("/process_image", body);
  }

  chatCompletion(
    messages: ChatMessagePayload[],
    sessionId?: string | null
  ): Promise<ChatCompletionResponse> {
    const body: Record<string, unknown> = { messages };
    if (sessionId) body.session_id = sessionId;
    return this.post("/chat_completion", body);
  }

  async latestFrame(): Promise<FrameEvent | null> {
    const response = await this.fetchFn(`${this.baseUrl}/frames/latest`);
    if (response.status === 404) return null;
    if (!response.ok) {
      throw new GatewayHttpError(response.status, "error", response.statusText);
    }
    return (await response.json()) as FrameEvent;
  }
}

export function websocketUrl(gatewayUrl: string): string {
  return gatewayUrl.replace(/\/$/, "").replace(/^http/, "ws") + "/frames";
}
