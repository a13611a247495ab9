/** Configuration form state: raw input strings -> API body + field errors. */

import type { SessionConfigBody } from "./api.js";
import { invalidFields, validateConfigBody } from "./validation.js";

export interface FormState {
  direction: string;
  transport: string;
  udp_payload_bytes: string;
  target_send_rate_bps: string;
  url: string;
  duration_s: string;
  server_host: string;
  control_port: string;
  data_tcp_port: string;
  data_udp_port: string;
  reference_lat: string;
  reference_lon: string;
  gps: string;
  radio: string;
}

export const DEFAULT_FORM: FormState = {
  direction: "downlink",
  transport: "tcp",
  udp_payload_bytes: "8192",
  target_send_rate_bps: "",
  url: "",
  duration_s: "",
  server_host: "127.0.0.1",
  control_port: "5201",
  data_tcp_port: "",
  data_udp_port: "",
  reference_lat: "",
  reference_lon: "",
  gps: "none",
  radio: "none",
};

const NUMERIC_FIELDS = new Set([
  "udp_payload_bytes", "target_send_rate_bps", "duration_s", "control_port",
  "data_tcp_port", "data_udp_port", "reference_lat", "reference_lon",
]);

/** Build the POST /sessions body; empty inputs are omitted, numbers parsed. */
export function formToBody(form: FormState): SessionConfigBody {
  const body: Record<string, unknown> = {};
  for (const [key, raw] of Object.entries(form)) {
    const value = raw.trim();
    if (value === "") continue;
    if (key === "udp_payload_bytes" && form.transport !== "udp") continue;
    if (key === "target_send_rate_bps" && form.transport !== "udp") continue;
    if (key === "url" && form.transport !== "http") continue;
    body[key] = NUMERIC_FIELDS.has(key) ? Number(value) : value;
  }
  return body as SessionConfigBody;
}

export interface FormCheck {
  body: SessionConfigBody;
  errors: Map<string, string>;
  ok: boolean;
}

export function checkForm(form: FormState): FormCheck {
  const body = formToBody(form);
  const errors = new Map<string, string>();
  for (const [key, raw] of Object.entries(form)) {
    if (NUMERIC_FIELDS.has(key) && raw.trim() !== "" && !Number.isFinite(Number(raw))) {
      errors.set(key, "must be a number");
    }
  }
  for (const problem of validateConfigBody(body)) {
    if (!errors.has(problem.field)) errors.set(problem.field, problem.message);
  }
  return { body, errors, ok: errors.size === 0 };
}

export { invalidFields };
