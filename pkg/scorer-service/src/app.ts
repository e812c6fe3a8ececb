/**
 * HTTP app exposing the scorers as batched JSON endpoints.
 *
 * POST /embed  {texts: [string]}                      -> {vectors: [[number]], dim}
 * POST /nli    {pairs: [{premise, hypothesis}]}       -> {logits: [{entail, neutral, contra}]}
 * POST /rerank {query: string, candidates: [string]}  -> {logits: [number]}
 * GET  /health                                        -> engine identifiers and versions
 *
 * Response lists are index-aligned with the request lists. Batches larger
 * than the configured maximum are rejected with 413.
 */

import express, { type Express, type NextFunction, type Request, type Response } from "express";
import { z } from "zod";

import {
  EMBED_DIM,
  embedText,
  nliLogits,
  rerankLogits,
  resolveEngine,
  type ScorerEngine,
} from "./scorers.js";

export const DEFAULT_MAX_BATCH = 256;

export interface AppConfig {
  /** Model identifier per endpoint; defaults to each registry's first entry. */
  models?: { embed?: string; nli?: string; rerank?: string };
  /** Largest accepted list length per request (texts, pairs, or candidates). */
  maxBatch?: number;
}

const embedRequest = z.object({
  texts: z.array(z.string()),
});

const nliRequest = z.object({
  pairs: z.array(z.object({ premise: z.string(), hypothesis: z.string() })),
});

const rerankRequest = z.object({
  query: z.string(),
  candidates: z.array(z.string()),
});

/**
 * Build the service app. Resolves all three engines up front, so an unknown
 * model identifier fails here — before the server ever binds a port.
 */
export function createApp(config: AppConfig = {}): Express {
  const maxBatch = config.maxBatch ?? DEFAULT_MAX_BATCH;
  const engines: Record<"embed" | "nli" | "rerank", ScorerEngine> = {
    embed: resolveEngine("embed", config.models?.embed),
    nli: resolveEngine("nli", config.models?.nli),
    rerank: resolveEngine("rerank", config.models?.rerank),
  };

  const app = express();
  app.use(express.json({ limit: "8mb" }));

  const rejectOversize = (res: Response, batchSize: number): boolean => {
    if (batchSize > maxBatch) {
      res.status(413).json({
        error: `batch of ${batchSize} exceeds the maximum of ${maxBatch} items per request`,
        max_batch: maxBatch,
      });
      return true;
    }
    return false;
  };

  app.post("/embed", (req: Request, res: Response) => {
    const parsed = embedRequest.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: `invalid /embed request: ${parsed.error.message}` });
      return;
    }
    const { texts } = parsed.data;
    if (rejectOversize(res, texts.length)) return;
    res.json({ vectors: texts.map(embedText), dim: EMBED_DIM });
  });

  app.post("/nli", (req: Request, res: Response) => {
    const parsed = nliRequest.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: `invalid /nli request: ${parsed.error.message}` });
      return;
    }
    const { pairs } = parsed.data;
    if (rejectOversize(res, pairs.length)) return;
    res.json({ logits: pairs.map((p) => nliLogits(p.premise, p.hypothesis)) });
  });

  app.post("/rerank", (req: Request, res: Response) => {
    const parsed = rerankRequest.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: `invalid /rerank request: ${parsed.error.message}` });
      return;
    }
    const { query, candidates } = parsed.data;
    if (rejectOversize(res, candidates.length)) return;
    res.json({ logits: rerankLogits(query, candidates) });
  });

  app.get("/health", (_req: Request, res: Response) => {
    res.json({
      status: "ok",
      max_batch: maxBatch,
      models: {
        embed: engines.embed.id,
        nli: engines.nli.id,
        rerank: engines.rerank.id,
      },
      versions: {
        embed: engines.embed.version,
        nli: engines.nli.version,
        rerank: engines.rerank.version,
      },
    });
  });

  app.use((err: Error, _req: Request, res: Response, next: NextFunction) => {
    if (res.headersSent) {
      next(err);
      return;
    }
    const status = (err as { status?: number }).status;
    if (status === 413) {
      res.status(413).json({ error: "request body too large" });
    } else if (err instanceof SyntaxError || status === 400) {
      res.status(400).json({ error: "request body is not valid JSON" });
    } else {
      res.status(500).json({ error: "internal error" });
    }
  });

  return app;
}
