/**
 * The request loop: one line in, one JSON reply out. Adapter failures and
 * malformed requests become {"ok":false,...} replies and the worker keeps
 * serving; only a shutdown request (or closed stdin) ends the loop. The
 * reply stream carries protocol JSON only; diagnostics go elsewhere.
 */

import * as readline from "node:readline";
import type { Readable, Writable } from "node:stream";

import type { Adapter } from "./adapters";
import { PROTOCOL_VERSION, Reply, Request, ensureRowStochastic } from "./protocol";

export interface ServeOptions {
  input?: Readable;
  output?: Writable;
  diagnostics?: Writable;
}

export function handleRequest(adapter: Adapter, message: Request):
    { reply: Reply; stop: boolean } {
  switch (message.op) {
    case "handshake": {
      if (message.version !== PROTOCOL_VERSION) {
        throw new Error(`unsupported protocol version ${message.version}`);
      }
      return {
        reply: { ok: true, model: adapter.name, classes: adapter.classes },
        stop: false,
      };
    }
    case "fit": {
      const started = process.hrtime.bigint();
      adapter.fit(message.X, message.y, message.seed ?? 0);
      const seconds = Number(process.hrtime.bigint() - started) / 1e9;
      return { reply: { ok: true, fit_seconds: seconds }, stop: false };
    }
    case "predict_proba": {
      const proba = ensureRowStochastic(adapter.predictProba(message.X));
      return { reply: { ok: true, proba }, stop: false };
    }
    case "shutdown":
      return { reply: { ok: true }, stop: true };
    default:
      throw new Error(`unknown op ${(message as { op?: string }).op}`);
  }
}

export function serve(adapter: Adapter, options: ServeOptions = {}): Promise<void> {
  const input = options.input ?? process.stdin;
  const output = options.output ?? process.stdout;
  const diagnostics = options.diagnostics ?? process.stderr;

  return new Promise((resolve) => {
    const lines = readline.createInterface({ input, terminal: false });
    const send = (reply: Reply) => output.write(JSON.stringify(reply) + "\n");

    lines.on("line", (line) => {
      if (line.trim().length === 0) {
        return;
      }
      let stop = false;
      try {
        const message = JSON.parse(line) as Request;
        const handled = handleRequest(adapter, message);
        send(handled.reply);
        stop = handled.stop;
      } catch (error) {
        const text = error instanceof Error ? error.message : String(error);
        diagnostics.write(`[bridge:${adapter.name}] ${text}\n`);
        send({ ok: false, error: text });
      }
      if (stop) {
        lines.close();
      }
    });
    lines.on("close", () => resolve());
  });
}
