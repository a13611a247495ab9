/** Live record stream over WebSocket with auto-reconnect and gap markers. */

export interface LiveHandlers {
  onMessage(text: string): void;
  /** Called when a dropped connection comes back; records may be missing. */
  onGap?(): void;
  onClose?(): void;
}

export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

const defaultFactory: SocketFactory = (url) =>
  new WebSocket(url) as unknown as SocketLike;

export class LiveSocket {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private stopped = false;
  private hadConnection = false;

  constructor(
    private url: string,
    private handlers: LiveHandlers,
    private factory: SocketFactory = defaultFactory,
    private scheduler: (fn: () => void, ms: number) => void = (fn, ms) => {
      setTimeout(fn, ms);
    },
  ) {
    this.connect();
  }

  private connect(): void {
    if (this.stopped) return;
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      if (this.hadConnection) this.handlers.onGap?.();
      this.hadConnection = true;
    };
    socket.onmessage = (ev) => this.handlers.onMessage(ev.data);
    socket.onclose = () => {
      if (this.stopped) {
        this.handlers.onClose?.();
        return;
      }
      const backoff = Math.min(500 * 2 ** this.attempts, 10_000);
      this.attempts += 1;
      this.scheduler(() => this.connect(), backoff);
    };
  }

  close(): void {
    this.stopped = true;
    this.socket?.close();
  }
}
