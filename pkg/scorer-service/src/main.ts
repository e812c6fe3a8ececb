/**
 * CLI entrypoint: start the scorer service.
 *
 * Flags (each falls back to an environment variable, then a default):
 *   --port          SCORER_PORT           default 8099
 *   --embed-model   SCORER_EMBED_MODEL    default lexical-hash-embedder-384
 *   --nli-model     SCORER_NLI_MODEL      default lexical-overlap-nli
 *   --rerank-model  SCORER_RERANK_MODEL   default lexical-cosine-reranker
 *   --max-batch     SCORER_MAX_BATCH      default 256
 *
 * An unresolvable model identifier aborts startup with a nonzero exit.
 */

import { createApp, DEFAULT_MAX_BATCH } from "./app.js";

interface CliOptions {
  port: number;
  embedModel?: string;
  nliModel?: string;
  rerankModel?: string;
  maxBatch: number;
}

function parseArgs(argv: string[]): CliOptions {
  const env = process.env;
  const options: CliOptions = {
    port: Number(env.SCORER_PORT ?? 8099),
    embedModel: env.SCORER_EMBED_MODEL,
    nliModel: env.SCORER_NLI_MODEL,
    rerankModel: env.SCORER_RERANK_MODEL,
    maxBatch: Number(env.SCORER_MAX_BATCH ?? DEFAULT_MAX_BATCH),
  };
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`missing value for ${flag}`);
    switch (flag) {
      case "--port":
        options.port = Number(value);
        break;
      case "--embed-model":
        options.embedModel = value;
        break;
      case "--nli-model":
        options.nliModel = value;
        break;
      case "--rerank-model":
        options.rerankModel = value;
        break;
      case "--max-batch":
        options.maxBatch = Number(value);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!Number.isInteger(options.port) || options.port < 0 || options.port > 65535) {
    throw new Error(`invalid port ${options.port}`);
  }
  if (!Number.isInteger(options.maxBatch) || options.maxBatch < 1) {
    throw new Error(`invalid max batch ${options.maxBatch}`);
  }
  return options;
}

function main(): void {
  let options: CliOptions;
  let app;
  try {
    options = parseArgs(process.argv.slice(2));
    app = createApp({
      models: {
        embed: options.embedModel,
        nli: options.nliModel,
        rerank: options.rerankModel,
      },
      maxBatch: options.maxBatch,
    });
  } catch (err) {
    console.error(`scorer-service: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
  const server = app.listen(options.port, () => {
    const address = server.address();
    const port = typeof address === "object" && address !== null ? address.port : options.port;
    console.log(`scorer-service listening on port ${port}`);
  });
}

main();
