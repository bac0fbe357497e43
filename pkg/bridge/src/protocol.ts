/**
 * Wire protocol shared with the harness client: newline-delimited JSON over
 * stdin/stdout.
 *
 *   -> {"op":"handshake","version":1}  <- {"ok":true,"model":str,"classes":int|null}
 *   -> {"op":"fit","X":[[..]],"y":[..],"seed":int}  <- {"ok":true,"fit_seconds":n}
 *   -> {"op":"predict_proba","X":[[..]]}            <- {"ok":true,"proba":[[..]]}
 *   -> {"op":"shutdown"}                            <- {"ok":true}
 *   any failure                                     <- {"ok":false,"error":str}
 *
 * Reals travel as plain JSON numbers; JSON.stringify emits the shortest
 * round-trip decimal, so a double survives worker -> client unchanged.
 */

export const PROTOCOL_VERSION = 1;

export interface HandshakeRequest {
  op: "handshake";
  version: number;
}

export interface FitRequest {
  op: "fit";
  X: number[][];
  y: number[];
  seed: number;
}

export interface PredictRequest {
  op: "predict_proba";
  X: number[][];
}

export interface ShutdownRequest {
  op: "shutdown";
}

export type Request =
  | HandshakeRequest
  | FitRequest
  | PredictRequest
  | ShutdownRequest;

export type Reply =
  | { ok: true; model: string; classes: number | null }
  | { ok: true; fit_seconds: number }
  | { ok: true; proba: number[][] }
  | { ok: true }
  | { ok: false; error: string };

/** Static description of one worker for harness configuration. */
export interface WorkerManifest {
  model: string;
  command: string[];
  handshakeVersion: number;
  supportsRefit: boolean;
}

const ROW_SUM_TOLERANCE = 1e-9;

/**
 * Rows must sum to 1 within 1e-9 before they go on the wire. Rows already
 * inside tolerance pass through untouched so stored matrices stay
 * bit-identical; out-of-tolerance rows are renormalized.
 */
export function ensureRowStochastic(rows: number[][]): number[][] {
  return rows.map((row) => {
    let sum = 0;
    for (const v of row) {
      if (!Number.isFinite(v) || v < 0) {
        throw new Error(`invalid probability entry ${v}`);
      }
      sum += v;
    }
    if (sum <= 0) {
      throw new Error("probability row sums to zero");
    }
    if (Math.abs(sum - 1) <= ROW_SUM_TOLERANCE) {
      return row;
    }
    return row.map((v) => v / sum);
  });
}
