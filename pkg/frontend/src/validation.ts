/** Client-side mirror of the agent's config validation.
 *
 * These rules must stay in lockstep with the API's 422 responses; the
 * contract test replays a corpus generated from the agent's own
 * validator and asserts identical accept/reject decisions and flagged
 * field names.
 */

import type { SessionConfigBody } from "./api.js";

const DIRECTIONS = ["uplink", "downlink"];
const TRANSPORTS = ["tcp", "udp", "http"];
const MIN_UDP_PAYLOAD = 9;

const KNOWN_FIELDS = new Set([
  "direction", "transport", "udp_payload_bytes", "target_send_rate_bps",
  "url", "duration_s", "server_host", "control_port", "data_tcp_port",
  "data_udp_port", "reference_lat", "reference_lon", "gps", "radio",
  "radio_seed", "log_path",
]);

export interface Problem {
  field: string;
  message: string;
}

function specProblems(body: SessionConfigBody): Problem[] {
  const problems: Problem[] = [];
  if (!DIRECTIONS.includes(body.direction ?? "")) {
    problems.push({ field: "direction", message: "must be uplink or downlink" });
  }
  if (!TRANSPORTS.includes(body.transport ?? "")) {
    problems.push({ field: "transport", message: "must be tcp, udp, or http" });
    return problems; // the agent stops spec checks after a bad transport
  }
  if (body.transport === "http") {
    if (body.direction === "uplink") {
      problems.push({ field: "direction", message: "http supports downlink only" });
    }
    if (!body.url) {
      problems.push({ field: "url", message: "required for http transport" });
    }
  }
  if (body.transport === "udp") {
    if (body.udp_payload_bytes == null) {
      problems.push({ field: "udp_payload_bytes", message: "required for udp" });
    } else if (body.udp_payload_bytes < MIN_UDP_PAYLOAD) {
      problems.push({
        field: "udp_payload_bytes",
        message: `must be >= ${MIN_UDP_PAYLOAD}`,
      });
    }
    if (body.target_send_rate_bps != null && body.target_send_rate_bps <= 0) {
      problems.push({ field: "target_send_rate_bps", message: "must be positive" });
    }
  }
  if (body.duration_s != null && body.duration_s <= 0) {
    problems.push({ field: "duration_s", message: "must be positive" });
  }
  return problems;
}

function portProblem(name: string, value: number | undefined): Problem | null {
  if (value != null && !(value >= 1 && value <= 65535)) {
    return { field: name, message: "must be in 1..65535" };
  }
  return null;
}

export function validateConfigBody(body: SessionConfigBody): Problem[] {
  const problems: Problem[] = [];
  for (const key of Object.keys(body)) {
    if (!KNOWN_FIELDS.has(key)) {
      problems.push({ field: key, message: "unknown field" });
    }
  }
  problems.push(...specProblems(body));
  if (body.transport !== "http" && body.server_host === "") {
    problems.push({ field: "server_host", message: "required" });
  }
  const controlPort = body.control_port ?? 5201;
  if (!(controlPort >= 1 && controlPort <= 65535)) {
    problems.push({ field: "control_port", message: "must be in 1..65535" });
  }
  for (const name of ["data_tcp_port", "data_udp_port"] as const) {
    const problem = portProblem(name, body[name]);
    if (problem) problems.push(problem);
  }
  if ((body.reference_lat == null) !== (body.reference_lon == null)) {
    problems.push({
      field: "reference_lon",
      message: "reference needs both lat and lon",
    });
  }
  if (body.reference_lat != null && !(body.reference_lat >= -90 && body.reference_lat <= 90)) {
    problems.push({ field: "reference_lat", message: "must be in [-90, 90]" });
  }
  if (body.reference_lon != null && !(body.reference_lon >= -180 && body.reference_lon <= 180)) {
    problems.push({ field: "reference_lon", message: "must be in [-180, 180]" });
  }
  const gps = body.gps ?? "none";
  if (gps !== "none" && !gps.startsWith("nmea:") && !gps.startsWith("replay:")) {
    problems.push({ field: "gps", message: "none, nmea:PATH, or replay:FILE" });
  }
  const radio = body.radio ?? "none";
  if (radio !== "none" && radio !== "synthetic" && !radio.startsWith("replay:")) {
    problems.push({ field: "radio", message: "none, synthetic, or replay:FILE" });
  }
  if (body.log_path === "") {
    problems.push({ field: "log_path", message: "required" });
  }
  return problems;
}

/** Sorted, de-duplicated field names, as the contract corpus records them. */
export function invalidFields(body: SessionConfigBody): string[] {
  return [...new Set(validateConfigBody(body).map((p) => p.field))].sort();
}
