/** The two pipelines: whole images to ImageRecords, boxes to instance or
 * proposal records. Unreadable images are skipped with a warning and show
 * up in the summary; the output file is still written atomically. */

import { readFileSync } from "node:fs";
import { basename } from "node:path";

import { clampBox, cropToSquare } from "./crops.js";
import type { Encoder } from "./encoder.js";
import { imageLine, instanceLine, proposalLine, writeLines } from "./jsonl.js";
import { decodePng } from "./png.js";
import type { CropTask, EmbedSummary, ImageTask, Raster } from "./types.js";

function defaultId(path: string): string {
  return basename(path).replace(/\.[^.]+$/, "");
}

function uniqueId(base: string, used: Set<string>): string {
  let candidate = base;
  let suffix = 2;
  while (used.has(candidate)) {
    candidate = `${base}-${suffix}`;
    suffix++;
  }
  used.add(candidate);
  return candidate;
}

function loadRaster(path: string, warn: (msg: string) => void): Raster | null {
  try {
    return decodePng(readFileSync(path));
  } catch (err) {
    warn(`skipping unreadable image ${path}: ${(err as Error).message}`);
    return null;
  }
}

export function embedImages(
  tasks: ImageTask[],
  encoder: Encoder,
  outPath: string,
  warn: (msg: string) => void = console.warn,
): EmbedSummary {
  const lines: string[] = [];
  const used = new Set<string>();
  let skipped = 0;
  for (const task of tasks) {
    const raster = loadRaster(task.path, warn);
    if (raster === null) {
      skipped++;
      continue;
    }
    const imageId = uniqueId(task.imageId ?? defaultId(task.path), used);
    lines.push(imageLine(imageId, encoder.embed(raster), task.sourceUri));
  }
  writeLines(outPath, lines);
  return { written: lines.length, skipped, clamped: 0 };
}

export interface CropResult {
  summary: EmbedSummary;
  kind: "instances" | "proposals";
  classes: string[];
}

export function embedCrops(
  tasks: CropTask[],
  encoder: Encoder,
  outPath: string,
  warn: (msg: string) => void = console.warn,
): CropResult {
  const labeled = tasks.filter((t) => t.label !== undefined).length;
  const scored = tasks.filter((t) => t.score !== undefined).length;
  let kind: "instances" | "proposals";
  if (labeled === tasks.length && tasks.length > 0) {
    kind = "instances";
  } else if (scored === tasks.length && labeled === 0 && tasks.length > 0) {
    kind = "proposals";
  } else {
    throw new Error(
      "crop tasks must all carry 'label' (instances) or all carry 'score' (proposals)",
    );
  }

  // decode each image once
  const byPath = new Map<string, CropTask[]>();
  for (const task of tasks) {
    const group = byPath.get(task.path);
    if (group) group.push(task);
    else byPath.set(task.path, [task]);
  }

  const lines: string[] = [];
  const classes = new Set<string>();
  const perImageCounter = new Map<string, number>();
  let skipped = 0;
  let clampedCount = 0;
  for (const [path, group] of byPath) {
    const raster = loadRaster(path, warn);
    if (raster === null) {
      skipped += group.length;
      continue;
    }
    for (const task of group) {
      const imageId = task.imageId ?? defaultId(task.path);
      const { box, clamped } = clampBox(task.bbox, raster.width, raster.height);
      if (clamped) clampedCount++;
      if (box === null) {
        warn(`skipping degenerate box ${JSON.stringify(task.bbox)} in ${path}`);
        skipped++;
        continue;
      }
      if (clamped) {
        warn(`clamped box ${JSON.stringify(task.bbox)} to ${JSON.stringify(box)} in ${path}`);
      }
      const embedding = encoder.embed(cropToSquare(raster, box));
      if (kind === "instances") {
        const index = perImageCounter.get(imageId) ?? 0;
        perImageCounter.set(imageId, index + 1);
        classes.add(task.label as string);
        lines.push(instanceLine(`${imageId}:${index}`, imageId, box, task.label as string, embedding));
      } else {
        lines.push(proposalLine(imageId, box, task.score as number, embedding));
      }
    }
  }
  writeLines(outPath, lines);
  return {
    summary: { written: lines.length, skipped, clamped: clampedCount },
    kind,
    classes: Array.from(classes).sort(),
  };
}
