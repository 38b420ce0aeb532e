#!/usr/bin/env node
/** racdet-bridge: turn images into the engine's embedding JSONL files.
 *
 *   embed-images --in tasks.json --out images.jsonl
 *                [--encoder patchproj-64] [--manifest-out manifest.json]
 *   embed-crops  --in crops.json --out instances.jsonl
 *                [--encoder patchproj-64] [--manifest-out manifest.json]
 *   gen-fixture  --out dir [--images 10] [--boxes 20] [--seed 1]
 *
 * Task manifests are JSON or CSV (path, image_id, x0..y1, label, score);
 * a label column makes crops an instances file, a score column a
 * proposals file. Exit codes: 0 success, 1 usage error, 2 data error.
 */

import { parseArgs } from "node:util";

import { embedCrops, embedImages } from "./embed.js";
import { createEncoder } from "./encoder.js";
import { generateFixture } from "./fixture.js";
import { writeManifest } from "./jsonl.js";
import { loadCropTasks, loadImageTasks } from "./tasks.js";

const USAGE =
  "usage: racdet-bridge <embed-images|embed-crops|gen-fixture> [options]\n" +
  "  embed-images --in <tasks.json|csv> --out <images.jsonl> [--encoder patchproj-64] [--manifest-out <path>]\n" +
  "  embed-crops  --in <crops.json|csv> --out <records.jsonl> [--encoder patchproj-64] [--manifest-out <path>]\n" +
  "  gen-fixture  --out <dir> [--images 10] [--boxes 20] [--seed 1]";

function fail(code: number, message: string): never {
  console.error(message);
  process.exit(code);
}

export function run(argv: string[]): void {
  const command = argv[0];
  const rest = argv.slice(1);
  if (!command || command === "--help" || command === "-h") {
    console.log(USAGE);
    process.exit(command ? 0 : 1);
  }

  let values: Record<string, string | undefined>;
  try {
    values = parseArgs({
      args: rest,
      options: {
        in: { type: "string" },
        out: { type: "string" },
        encoder: { type: "string" },
        "manifest-out": { type: "string" },
        images: { type: "string" },
        boxes: { type: "string" },
        seed: { type: "string" },
      },
    }).values as Record<string, string | undefined>;
  } catch (err) {
    fail(1, `${(err as Error).message}\n${USAGE}`);
  }

  const need = (name: string): string => {
    const value = values[name];
    if (!value) fail(1, `missing --${name}\n${USAGE}`);
    return value;
  };

  try {
    if (command === "embed-images") {
      const encoder = createEncoder(values.encoder ?? "patchproj-64");
      const tasks = loadImageTasks(need("in"));
      const summary = embedImages(tasks, encoder, need("out"));
      if (values["manifest-out"]) {
        writeManifest(values["manifest-out"], encoder.dim, []);
      }
      console.log(
        `embedded ${summary.written} images (${summary.skipped} skipped) ` +
          `with ${encoder.id} -> ${values.out}`,
      );
    } else if (command === "embed-crops") {
      const encoder = createEncoder(values.encoder ?? "patchproj-64");
      const tasks = loadCropTasks(need("in"));
      const result = embedCrops(tasks, encoder, need("out"));
      if (values["manifest-out"]) {
        writeManifest(values["manifest-out"], encoder.dim, result.classes);
      }
      console.log(
        `embedded ${result.summary.written} ${result.kind} ` +
          `(${result.summary.skipped} skipped, ${result.summary.clamped} clamped) ` +
          `with ${encoder.id} -> ${values.out}`,
      );
    } else if (command === "gen-fixture") {
      const options = {
        out: need("out"),
        images: Number(values.images ?? 10),
        boxes: Number(values.boxes ?? 20),
        seed: Number(values.seed ?? 1),
      };
      generateFixture(options);
      console.log(
        `fixture written to ${options.out}: ${options.images} images, ${options.boxes} boxes`,
      );
    } else {
      fail(1, `unknown command '${command}'\n${USAGE}`);
    }
  } catch (err) {
    fail(2, `error: ${(err as Error).message}`);
  }
}

run(process.argv.slice(2));
