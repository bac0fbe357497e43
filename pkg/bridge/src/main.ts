#!/usr/bin/env node
/** CLI entry: pick an adapter and serve the wire protocol on stdio. */

import { parseArgs } from "node:util";

import { buildAdapter } from "./adapters";
import { serve } from "./worker";

function main(): void {
  const { values } = parseArgs({
    options: {
      adapter: { type: "string", default: "prior" },
      matrix: { type: "string" },
      name: { type: "string" },
    },
  });
  const adapter = buildAdapter(values.adapter as string, {
    matrix: values.matrix as string | undefined,
    name: values.name as string | undefined,
  });
  serve(adapter).then(() => process.exit(0));
}

main();
