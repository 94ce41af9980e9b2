import { announce, createLiveRegion } from "./a11y.js";
import { ChatController } from "./chat.js";
import { FrameChannel } from "./connection.js";
import { GatewayClient } from "./gatewayClient.js";
import type { FrameEvent } from "./types.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export function startApp(): void {
  createLiveRegion();
  const urlInput = byId<HTMLInputElement>("gateway-url");
  const connectButton = byId<HTMLButtonElement>("connect");
  const statusBanner = byId<HTMLElement>("status");
  const liveView = byId<HTMLImageElement>("live-view");
  const frameLabel = byId<HTMLElement>("frame-label");
  const chatList = byId<HTMLElement>("chat");
  const askForm = byId<HTMLFormElement>("ask-form");
  const askInput = byId<HTMLInputElement>("ask-input");
  const askButton = byId<HTMLButtonElement>("ask-send");
  const loadModelButton = byId<HTMLButtonElement>("load-model");
  const retryButton = byId<HTMLButtonElement>("retry");
  const newConversationButton = byId<HTMLButtonElement>("new-conversation");

  let client = new GatewayClient(urlInput.value);
  let chat: ChatController;

  const setStatus = (text: string, kind: "ok" | "warn" | "error"): void => {
    statusBanner.textContent = text;
    statusBanner.dataset.kind = kind;
    announce(text);
  };

  const showFrame = (frame: FrameEvent): void => {
    liveView.src = `data:image/jpeg;base64,${frame.jpeg_base64}`;
    liveView.alt = `camera frame ${frame.frame_id}`;
    frameLabel.textContent = `frame ${frame.frame_id} at ${frame.received_at}`;
  };

  const renderHistory = (): void => {
    chatList.replaceChildren(
      ...chat.history.map((item) => {
        const li = document.createElement("li");
        li.className = `bubble ${item.role}${item.failed ? " failed" : ""}`;
        const label = item.role === "user" ? "You" : "Assistant";
        const suffix = item.failed ? " (failed, use Retry)" : "";
        li.textContent = `${label}: ${item.text}${suffix}`;
        return li;
      })
    );
    chatList.scrollTop = chatList.scrollHeight;
  };

  const channel = new FrameChannel(
    (url) => new WebSocket(url) as unknown as import("./connection.js").FrameSocket,
    {
      onPhase: (phase, notice) => {
        if (phase === "connected") setStatus("connected to gateway", "ok");
        else if (phase === "lost") setStatus(notice ?? "connection lost", "error");
        else if (phase === "connecting") setStatus("connecting…", "warn");
        else setStatus(notice ?? "disconnected", notice ? "error" : "warn");
        connectButton.textContent = phase === "connected" ? "Disconnect" : "Connect";
        askInput.disabled = phase !== "connected";
        askButton.disabled = phase !== "connected";
      },
      onFrame: showFrame,
    }
  );

  const makeChat = (): ChatController =>
    new ChatController(client, () => channel.lastFrame, {
      onHistory: renderHistory,
      onBusy: (busy) => {
        askInput.disabled = busy || channel.phase !== "connected";
        askButton.disabled = busy || channel.phase !== "connected";
        if (!busy) askInput.focus();
      },
      onNeedsModel: () => {
        loadModelButton.hidden = false;
        setStatus("the model is not loaded yet", "warn");
      },
      onError: (message, retryable) => {
        retryButton.hidden = !retryable;
        setStatus(message, "error");
      },
    });
  chat = makeChat();

  let currentUrl = urlInput.value;
  connectButton.addEventListener("click", () => {
    if (channel.phase === "connected") {
      channel.disconnect();
      return;
    }
    // reconnects to the same gateway keep the rendered history; only a new
    // target starts over
    if (urlInput.value !== currentUrl) {
      currentUrl = urlInput.value;
      client = new GatewayClient(currentUrl);
      chat = makeChat();
      renderHistory();
    }
    channel.connect(currentUrl);
  });

  askForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    chat.ask(askInput.value);
    askInput.value = "";
  });

  loadModelButton.addEventListener("click", () => {
    loadModelButton.hidden = true;
    void chat.loadModelAndRetry();
  });

  retryButton.addEventListener("click", () => {
    retryButton.hidden = true;
    chat.retry();
  });

  newConversationButton.addEventListener("click", () => {
    chat.newConversation();
    setStatus("started a new conversation", "ok");
  });

  askInput.focus();
}

if (typeof document !== "undefined" && document.getElementById("ask-form")) {
  startApp();
}
