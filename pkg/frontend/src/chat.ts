import { GatewayClient, GatewayHttpError } from "./gatewayClient.js";
import type { ChatMessagePayload, FrameEvent } from "./types.js";

export interface ChatItem {
  role: "user" | "assistant";
  text: string;
  frameRef: number | null;
  at: number;
  failed?: boolean;
}

export interface ChatEvents {
  onHistory?: (items: readonly ChatItem[]) => void;
  onBusy?: (busy: boolean) => void;
  onNeedsModel?: () => void;
  onError?: (message: string, retryable: boolean) => void;
}

/**
 * Conversation state: append-only history, one in-flight ask at a time
 * (later asks queue), no phantom assistant items on failure. Questions ride
 * on the latest camera frame via /process_image; without a frame they fall
 * back to /chat_completion with the typed history.
 */
export class ChatController {
  readonly history: ChatItem[] = [];
  sessionId: string | null = null;
  private inFlight = false;
  private queue: string[] = [];
  private failedItem: ChatItem | null = null;
  private events: ChatEvents;

  constructor(
    private client: GatewayClient,
    private latestFrame: () => FrameEvent | null,
    events: ChatEvents = {}
  ) {
    this.events = events;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  ask(text: string): void {
    const trimmed = text.trim();
    if (!trimmed) return;
    if (this.inFlight) {
      this.queue.push(trimmed);
      return;
    }
    void this.run(trimmed, null);
  }

  /** Re-sends the question that previously failed, reusing its bubble. */
  retry(): void {
    if (this.inFlight || !this.failedItem) return;
    const item = this.failedItem;
    this.failedItem = null;
    void this.run(item.text, item);
  }

  async loadModelAndRetry(): Promise<void> {
    try {
      await this.client.loadModel();
    } catch (err) {
      this.events.onError?.(`loading the model failed: ${String(err)}`, false);
      return;
    }
    this.retry();
  }

  newConversation(): void {
    this.sessionId = null;
    this.history.length = 0;
    this.failedItem = null;
    this.queue.length = 0;
    this.events.onHistory?.(this.history);
  }

  private historyAsMessages(upTo: ChatItem): ChatMessagePayload[] {
    const messages: ChatMessagePayload[] = [];
    for (const item of this.history) {
      if (item.failed && item !== upTo) continue;
      messages.push({ role: item.role, content: item.text });
      if (item === upTo) break;
    }
    return messages;
  }

  private async run(text: string, reuse: ChatItem | null): Promise<void> {
    this.inFlight = true;
    this.events.onBusy?.(true);
    const frame = this.latestFrame();
    let item: ChatItem;
    if (reuse) {
      item = reuse;
      delete item.failed;
    } else {
      item = {
        role: "user",
        text,
        frameRef: frame ? frame.frame_id : null,
        at: Date.now(),
      };
      this.history.push(item);
    }
    this.events.onHistory?.(this.history);
    try {
      let answer: string;
      if (frame) {
        const response = await this.client.processImage(
          frame.jpeg_base64,
          text,
          this.sessionId
        );
        this.sessionId = this.sessionId ?? response.session_id;
        answer = response.answer;
      } else {
        const response = await this.client.chatCompletion(
          this.historyAsMessages(item),
          this.sessionId
        );
        answer = response.answer;
      }
      this.history.push({
        role: "assistant",
        text: answer,
        frameRef: frame ? frame.frame_id : null,
        at: Date.now(),
      });
      this.events.onHistory?.(this.history);
    } catch (err) {
      item.failed = true;
      this.failedItem = item;
      this.events.onHistory?.(this.history);
      if (err instanceof GatewayHttpError && err.status === 409) {
        this.events.onNeedsModel?.();
      } else {
        this.events.onError?.(`question failed: ${String(err)}`, true);
      }
    } finally {
      this.inFlight = false;
      this.events.onBusy?.(false);
      const next = this.queue.shift();
      if (next !== undefined) {
        void this.run(next, null);
      }
    }
  }
}
