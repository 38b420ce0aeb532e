/** Shared shapes for the bridge pipeline. */

/** One image to embed at the whole-image level. */
export interface ImageTask {
  path: string;
  /** Defaults to the file name without extension; deduplicated if reused. */
  imageId?: string;
  sourceUri?: string;
}

/** One box to crop out of an image and embed.
 *
 * A `label` makes the output an instances file, a `score` makes it a
 * proposals file; mixing both kinds in one task list is an error.
 */
export interface CropTask {
  path: string;
  imageId?: string;
  /** [xMin, yMin, xMax, yMax] in pixels; clamped to the image with a warning. */
  bbox: [number, number, number, number];
  label?: string;
  score?: number;
}

export interface EmbedSummary {
  written: number;
  skipped: number;
  clamped: number;
}

/** Decoded image: RGBA bytes, row-major. */
export interface Raster {
  width: number;
  height: number;
  data: Uint8Array;
}
