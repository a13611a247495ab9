/** Typed client for the measurement agent's HTTP API. */

export interface SessionConfigBody {
  direction?: string;
  transport?: string;
  udp_payload_bytes?: number;
  target_send_rate_bps?: number;
  url?: string;
  duration_s?: number;
  server_host?: string;
  control_port?: number;
  data_tcp_port?: number;
  data_udp_port?: number;
  reference_lat?: number;
  reference_lon?: number;
  gps?: string;
  radio?: string;
  radio_seed?: number;
  log_path?: string;
}

export interface SessionSummary {
  record_count: number;
  total_bytes: number;
  mean_bps: number | null;
  min_bps: number | null;
  max_bps: number | null;
  mean_delay_ms: number | null;
  handover_count: number;
}

export interface SessionInfo {
  id: number;
  state: string;
  config: SessionConfigBody & { log_path?: string };
  record_count: number;
  summary: SessionSummary | null;
  error: string | null;
  stop_reason: string | null;
}

/** One CSV log row; every value is the exact string the recorder wrote. */
export type RecordRow = Record<string, string>;

export interface AnalysisResponse {
  summary: SessionSummary | null;
  rsrp_ecdf: [number, number][];
  throughput_bps: [number, number][];
  mean_delay_ms: [number, number][];
  rsrp_dbm: [number, number][];
}

export interface FieldError {
  field: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: FieldError[] | string,
  ) {
    super(typeof detail === "string" ? detail : `${status} from agent`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let detail: FieldError[] | string = response.statusText;
    try {
      const body = await response.json();
      detail = body.detail ?? detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class AgentApi {
  constructor(private base = "") {}

  createSession(body: SessionConfigBody): Promise<SessionInfo> {
    return request(`${this.base}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listSessions(): Promise<{ sessions: SessionInfo[] }> {
    return request(`${this.base}/sessions`);
  }

  getSession(id: number): Promise<SessionInfo> {
    return request(`${this.base}/sessions/${id}`);
  }

  startSession(id: number): Promise<SessionInfo> {
    return request(`${this.base}/sessions/${id}/start`, { method: "POST" });
  }

  stopSession(id: number): Promise<SessionInfo> {
    return request(`${this.base}/sessions/${id}/stop`, { method: "POST" });
  }

  getRecords(id: number, from = 0): Promise<{ from: number; next: number; records: RecordRow[] }> {
    return request(`${this.base}/sessions/${id}/records?from=${from}`);
  }

  getAnalysis(id: number): Promise<AnalysisResponse> {
    return request(`${this.base}/sessions/${id}/analysis`);
  }

  liveUrl(id: number): string {
    const origin = this.base || location.origin;
    return `${origin.replace(/^http/, "ws")}/sessions/${id}/live`;
  }
}
