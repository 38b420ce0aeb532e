/** Input manifest loading: JSON or CSV.
 *
 * JSON: an array of task objects, or {"images": [...]} / {"crops": [...]}.
 * CSV: header row with columns path, image_id, x0, y0, x1, y1, label,
 * score (the box and label/score columns only apply to crops). Relative
 * image paths resolve against the manifest's directory.
 */

import { readFileSync } from "node:fs";
import { dirname, resolve } from "node:path";

import type { CropTask, ImageTask } from "./types.js";

export function loadImageTasks(path: string): ImageTask[] {
  return loadRows(path).map((row) => {
    const task: ImageTask = { path: requireString(row, "path") };
    if (row.image_id !== undefined && row.image_id !== "") task.imageId = String(row.image_id);
    if (row.source_uri !== undefined && row.source_uri !== "") {
      task.sourceUri = String(row.source_uri);
    }
    return task;
  });
}

export function loadCropTasks(path: string): CropTask[] {
  return loadRows(path).map((row) => {
    const bbox = readBox(row);
    const task: CropTask = { path: requireString(row, "path"), bbox };
    if (row.image_id !== undefined && row.image_id !== "") task.imageId = String(row.image_id);
    if (row.label !== undefined && row.label !== "") task.label = String(row.label);
    if (row.score !== undefined && row.score !== "") {
      const score = Number(row.score);
      if (!Number.isFinite(score) || score < 0 || score > 1) {
        throw new Error(`score ${row.score} not in [0, 1]`);
      }
      task.score = score;
    }
    return task;
  });
}

type Row = Record<string, unknown>;

function loadRows(path: string): Row[] {
  const text = readFileSync(path, "utf-8");
  const base = dirname(path);
  let rows: Row[];
  if (path.endsWith(".csv")) {
    rows = parseCsv(text);
  } else {
    const parsed = JSON.parse(text);
    if (Array.isArray(parsed)) {
      rows = parsed as Row[];
    } else if (Array.isArray(parsed.images)) {
      rows = parsed.images as Row[];
    } else if (Array.isArray(parsed.crops)) {
      rows = parsed.crops as Row[];
    } else {
      throw new Error(`${path}: expected an array, or {"images": []} / {"crops": []}`);
    }
  }
  for (const row of rows) {
    if (typeof row.path === "string" && !row.path.startsWith("/")) {
      row.path = resolve(base, row.path);
    }
  }
  return rows;
}

function parseCsv(text: string): Row[] {
  const lines = text.split("\n").filter((line) => line.trim() !== "");
  if (lines.length === 0) return [];
  const header = lines[0].split(",").map((c) => c.trim());
  return lines.slice(1).map((line) => {
    const cells = line.split(",").map((c) => c.trim());
    const row: Row = {};
    header.forEach((name, i) => {
      if (cells[i] !== undefined && cells[i] !== "") row[name] = cells[i];
    });
    if (
      row.x0 !== undefined &&
      row.y0 !== undefined &&
      row.x1 !== undefined &&
      row.y1 !== undefined
    ) {
      row.bbox = [Number(row.x0), Number(row.y0), Number(row.x1), Number(row.y1)];
      delete row.x0;
      delete row.y0;
      delete row.x1;
      delete row.y1;
    }
    return row;
  });
}

function requireString(row: Row, key: string): string {
  const value = row[key];
  if (typeof value !== "string" || value === "") {
    throw new Error(`task is missing '${key}'`);
  }
  return value;
}

function readBox(row: Row): [number, number, number, number] {
  const value = row.bbox;
  if (!Array.isArray(value) || value.length !== 4) {
    throw new Error("crop task needs bbox: [x0, y0, x1, y1]");
  }
  const nums = value.map(Number);
  if (nums.some((n) => !Number.isFinite(n))) {
    throw new Error(`bbox has non-finite values: ${JSON.stringify(value)}`);
  }
  return [nums[0], nums[1], nums[2], nums[3]];
}
