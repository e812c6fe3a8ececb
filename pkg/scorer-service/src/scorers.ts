/**
 * Deterministic lexical scoring engines.
 *
 * Each engine is a pure function of its text inputs, so identical requests
 * always produce identical outputs. They stand in for pretrained checkpoints
 * (sentence embedder, NLI model, cross-encoder reranker); the engine actually
 * serving each endpoint is recorded under its identifier in /health.
 */

export const EMBED_DIM = 384;

/** 32-bit FNV-1a hash of a string's UTF-8 bytes. */
export function fnv1a(text: string): number {
  const bytes = Buffer.from(text, "utf8");
  let hash = 0x811c9dc5;
  for (const byte of bytes) {
    hash ^= byte;
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/** Lowercase word tokens: runs of letters, digits, or apostrophes. */
export function tokenize(text: string): string[] {
  return text.toLowerCase().match(/[a-z0-9']+/g) ?? [];
}

/**
 * Hashed bag-of-words sentence embedding (signed feature hashing), L2
 * normalized. Never returns the zero vector: texts with no tokens map to a
 * fixed unit basis vector, so downstream cosines are always defined.
 */
export function embedText(text: string): number[] {
  const vector = new Array<number>(EMBED_DIM).fill(0);
  for (const token of tokenize(text)) {
    const bucket = fnv1a(token) % EMBED_DIM;
    const sign = fnv1a(`sign:${token}`) % 2 === 0 ? 1 : -1;
    vector[bucket] += sign;
  }
  const norm = Math.sqrt(vector.reduce((acc, x) => acc + x * x, 0));
  if (norm === 0) {
    vector[0] = 1;
    return vector;
  }
  return vector.map((x) => x / norm);
}

/** Cosine similarity of two equal-length vectors. */
export function cosine(a: number[], b: number[]): number {
  let dot = 0;
  let normA = 0;
  let normB = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    normA += a[i] * a[i];
    normB += b[i] * b[i];
  }
  if (normA === 0 || normB === 0) return 0;
  return dot / Math.sqrt(normA * normB);
}

export interface NliLogits {
  entail: number;
  neutral: number;
  contra: number;
}

/**
 * Token-coverage entailment proxy: how much of the hypothesis's vocabulary
 * the premise supplies, mapped to logits in [-3, 3]. Full coverage (any
 * identity pair included) gives entail 3 > contra -3; disjoint texts give
 * the reverse. An empty hypothesis is vacuously covered.
 */
export function nliLogits(premise: string, hypothesis: string): NliLogits {
  const premiseTokens = new Set(tokenize(premise));
  const hypothesisTokens = new Set(tokenize(hypothesis));
  let coverage = 1;
  if (hypothesisTokens.size > 0) {
    let covered = 0;
    for (const token of hypothesisTokens) {
      if (premiseTokens.has(token)) covered += 1;
    }
    coverage = covered / hypothesisTokens.size;
  }
  const entail = 6 * coverage - 3;
  return { entail, neutral: 0, contra: -entail };
}

/**
 * Cross-encoder style relevance logits: scaled cosine between the hashed
 * embeddings of the query and each candidate. Duplicate candidates always
 * receive equal logits.
 */
export function rerankLogits(query: string, candidates: string[]): number[] {
  const queryVector = embedText(query);
  return candidates.map((candidate) => 4 * cosine(queryVector, embedText(candidate)));
}

export interface ScorerEngine {
  /** Identifier reported by /health for this endpoint's engine. */
  id: string;
  version: string;
}

/** Engines resolvable by identifier, per endpoint. */
export const ENGINE_REGISTRY: Record<"embed" | "nli" | "rerank", ScorerEngine[]> = {
  embed: [{ id: "lexical-hash-embedder-384", version: "0.1.0" }],
  nli: [{ id: "lexical-overlap-nli", version: "0.1.0" }],
  rerank: [{ id: "lexical-cosine-reranker", version: "0.1.0" }],
};

/**
 * Resolve a configured model identifier to a registered engine.
 * Unknown identifiers throw, so the service refuses to start rather than
 * silently serving a different scorer than the one asked for.
 */
export function resolveEngine(kind: "embed" | "nli" | "rerank", id?: string): ScorerEngine {
  const available = ENGINE_REGISTRY[kind];
  const engine = id === undefined ? available[0] : available.find((e) => e.id === id);
  if (!engine) {
    const known = available.map((e) => e.id).join(", ");
    throw new Error(`unknown ${kind} model ${JSON.stringify(id)}; available: ${known}`);
  }
  return engine;
}
