// Gateway wire shapes (see the service's schemas module).

export interface FrameEvent {
  frame_id: number;
  received_at: string;
  jpeg_base64: string;
}

export interface ProcessImageResponse {
  answer: string;
  session_id: string;
}

export interface ChatCompletionResponse {
  answer: string;
}

export interface ChatMessagePayload {
  role: "user" | "assistant";
  content: string;
}

export interface ErrorBody {
  error: string;
  detail: string;
}
