/** Writers for the engine's interchange formats.
 *
 * One JSON object per line, UTF-8, '\n' terminated, embeddings as plain
 * number arrays (already rounded to float32 so they re-read bit-exactly).
 * Files are written to a temp path and renamed into place.
 */

import { renameSync, writeFileSync } from "node:fs";

export function embeddingToJson(embedding: Float32Array): number[] {
  return Array.from(embedding);
}

export function imageLine(
  imageId: string,
  embedding: Float32Array,
  sourceUri?: string,
): string {
  const record: Record<string, unknown> = {
    image_id: imageId,
    embedding: embeddingToJson(embedding),
  };
  if (sourceUri !== undefined) record.source_uri = sourceUri;
  return JSON.stringify(record);
}

export function instanceLine(
  instanceId: string,
  imageId: string,
  bbox: [number, number, number, number],
  label: string,
  embedding: Float32Array,
): string {
  return JSON.stringify({
    instance_id: instanceId,
    image_id: imageId,
    bbox,
    label,
    embedding: embeddingToJson(embedding),
  });
}

export function proposalLine(
  imageId: string,
  bbox: [number, number, number, number],
  score: number,
  embedding: Float32Array,
): string {
  return JSON.stringify({
    image_id: imageId,
    bbox,
    proposal_score: score,
    embedding: embeddingToJson(embedding),
  });
}

export function writeLines(path: string, lines: string[]): void {
  atomicWrite(path, lines.map((line) => line + "\n").join(""));
}

export function writeManifest(path: string, dim: number, classes: string[]): void {
  atomicWrite(path, JSON.stringify({ dim, classes, version: 1 }) + "\n");
}

export function atomicWrite(path: string, text: string): void {
  const tmp = `${path}.tmp`;
  writeFileSync(tmp, text, "utf-8");
  renameSync(tmp, path);
}
