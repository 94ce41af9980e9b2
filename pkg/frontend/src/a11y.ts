// Polite live region so status changes reach screen readers.

let liveEl: HTMLElement | null = null;

export function createLiveRegion(): void {
  if (typeof document === "undefined") return;
  if (liveEl) return;
  const el = document.createElement("div");
  el.setAttribute("role", "status");
  el.setAttribute("aria-live", "polite");
  el.style.position = "absolute";
  el.style.left = "-9999px";
  el.style.width = "1px";
  el.style.height = "1px";
  el.style.overflow = "hidden";
  document.body.appendChild(el);
  liveEl = el;
}

export function announce(text: string): void {
  if (!liveEl) return;
  liveEl.textContent = text;
}
