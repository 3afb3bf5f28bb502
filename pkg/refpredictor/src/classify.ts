/**
 * Off-the-shelf classifier wrapper (tfjs, CPU). Models are loaded from a
 * local directory holding the usual tfjs layers artifacts:
 *
 *   model.json     topology + weights manifest
 *   *.bin          weight shards
 *   config.json    {"input_size": 32, "class_count": 10,
 *                   "apply_softmax": true, "normalize": {"mean": [...], "std": [...]}}
 *
 * Inference is deterministic: eval-mode graph, fixed preprocessing
 * (RGB / 255, bilinear resize to the configured input size).
 */

import { readFileSync } from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";
import * as jpeg from "jpeg-js";
import { PNG } from "pngjs";

import { PredictRequest, PredictResponse } from "./protocol.js";

export interface ModelConfig {
  inputSize: number;
  classCount: number;
  applySoftmax: boolean;
  mean?: number[];
  std?: number[];
}

export function loadModelConfig(dir: string): ModelConfig {
  const raw = JSON.parse(readFileSync(path.join(dir, "config.json"), "utf-8")) as Record<string, unknown>;
  const inputSize = Number(raw.input_size);
  const classCount = Number(raw.class_count);
  if (!Number.isInteger(inputSize) || inputSize < 1) {
    throw new Error(`config.json: bad input_size ${raw.input_size}`);
  }
  if (!Number.isInteger(classCount) || classCount < 2) {
    throw new Error(`config.json: bad class_count ${raw.class_count}`);
  }
  const normalize = raw.normalize as { mean?: number[]; std?: number[] } | undefined;
  return {
    inputSize,
    classCount,
    applySoftmax: raw.apply_softmax !== false,
    mean: normalize?.mean,
    std: normalize?.std,
  };
}

/** IO handler reading tfjs layers-model artifacts from the filesystem
 * (pure tfjs ships no node file handler). */
function fileSystemArtifacts(dir: string): tf.io.IOHandler {
  return {
    load: async () => {
      const manifest = JSON.parse(readFileSync(path.join(dir, "model.json"), "utf-8"));
      const specs: tf.io.WeightsManifestEntry[] = [];
      const buffers: Buffer[] = [];
      for (const group of manifest.weightsManifest ?? []) {
        specs.push(...group.weights);
        for (const shard of group.paths) {
          buffers.push(readFileSync(path.join(dir, shard)));
        }
      }
      const data = Buffer.concat(buffers);
      return {
        modelTopology: manifest.modelTopology,
        format: manifest.format,
        generatedBy: manifest.generatedBy,
        convertedBy: manifest.convertedBy,
        weightSpecs: specs,
        weightData: data.buffer.slice(data.byteOffset, data.byteOffset + data.byteLength),
      };
    },
  };
}

export function decodeImageToTensor(filePath: string): tf.Tensor3D {
  const bytes = readFileSync(filePath);
  let width: number;
  let height: number;
  let rgba: Uint8Array;
  if (bytes.length >= 8 && bytes[0] === 0x89 && bytes[1] === 0x50) {
    const png = PNG.sync.read(bytes);
    ({ width, height } = png);
    rgba = png.data;
  } else if (bytes.length >= 2 && bytes[0] === 0xff && bytes[1] === 0xd8) {
    const decoded = jpeg.decode(bytes, { useTArray: true });
    ({ width, height } = decoded);
    rgba = decoded.data;
  } else {
    throw new Error(`unsupported image format: ${filePath}`);
  }
  const rgb = new Float32Array(width * height * 3);
  for (let i = 0, j = 0; i < rgba.length; i += 4, j += 3) {
    rgb[j] = rgba[i] / 255;
    rgb[j + 1] = rgba[i + 1] / 255;
    rgb[j + 2] = rgba[i + 2] / 255;
  }
  return tf.tensor3d(rgb, [height, width, 3]);
}

export class Classifier {
  private constructor(
    private model: tf.LayersModel,
    private config: ModelConfig,
  ) {}

  static async load(dir: string): Promise<Classifier> {
    const config = loadModelConfig(dir);
    const model = await tf.loadLayersModel(fileSystemArtifacts(dir));
    return new Classifier(model, config);
  }

  scores(filePath: string): number[] {
    return tf.tidy(() => {
      let img: tf.Tensor = decodeImageToTensor(filePath);
      img = tf.image.resizeBilinear(img as tf.Tensor3D, [this.config.inputSize, this.config.inputSize]);
      if (this.config.mean && this.config.std) {
        img = img.sub(tf.tensor1d(this.config.mean)).div(tf.tensor1d(this.config.std));
      }
      let out = this.model.predict(img.expandDims(0)) as tf.Tensor;
      out = out.reshape([-1]);
      if (this.config.applySoftmax) {
        out = tf.softmax(out);
      }
      const values = Array.from(out.dataSync());
      if (values.length !== this.config.classCount) {
        throw new Error(
          `model emitted ${values.length} scores, config says ${this.config.classCount}`,
        );
      }
      return values;
    });
  }

  async predict(request: PredictRequest): Promise<PredictResponse> {
    try {
      return { id: request.id, scores: this.scores(request.path), prob: this.config.applySoftmax };
    } catch (err) {
      return { id: request.id, error: (err as Error).message || String(err) };
    }
  }
}
