/**
 * Frozen vision backbones keyed by identifier.
 *
 * The bundled backbone is a seeded random-feature convnet: patchify conv,
 * relu, a second conv, relu, global average pooling, then a random dense
 * lift to the output width. Its weights derive entirely from the identifier,
 * so it runs offline and re-extraction is bit-stable. The default width
 * matches the 768-wide transformer embeddings the engine is normally fed.
 */

import * as tf from "@tensorflow/tfjs";
import { gaussianArray } from "./rng";

export interface Backbone {
  name: string;
  outputDim: number;
  embed(batch: tf.Tensor4D): tf.Tensor2D; // [n,224,224,3] -> [n, outputDim]
}

class RandomFeatureConv implements Backbone {
  readonly name: string;
  readonly outputDim: number;
  private readonly conv1: tf.Tensor4D;
  private readonly conv2: tf.Tensor4D;
  private readonly dense: tf.Tensor2D;

  constructor(name: string, seed: number, outputDim: number) {
    this.name = name;
    this.outputDim = outputDim;
    const c1 = 64;
    const c2 = 192;
    // He-style scaling keeps activations in a sane range through the relus.
    this.conv1 = tf.tensor4d(
      gaussianArray(seed, 8 * 8 * 3 * c1, Math.sqrt(2 / (8 * 8 * 3))),
      [8, 8, 3, c1]
    );
    this.conv2 = tf.tensor4d(
      gaussianArray(seed + 1, 3 * 3 * c1 * c2, Math.sqrt(2 / (3 * 3 * c1))),
      [3, 3, c1, c2]
    );
    this.dense = tf.tensor2d(
      gaussianArray(seed + 2, c2 * outputDim, Math.sqrt(2 / c2)),
      [c2, outputDim]
    );
  }

  embed(batch: tf.Tensor4D): tf.Tensor2D {
    return tf.tidy(() => {
      let x = tf.relu(tf.conv2d(batch, this.conv1, 8, "valid"));
      x = tf.relu(tf.conv2d(x, this.conv2, 2, "same"));
      const pooled = tf.mean(x, [1, 2]) as tf.Tensor2D;
      return tf.relu(tf.matMul(pooled, this.dense));
    });
  }
}

const BUILDERS: Record<string, () => Backbone> = {
  "rp-conv-768": () => new RandomFeatureConv("rp-conv-768", 7, 768),
  "rp-conv-256": () => new RandomFeatureConv("rp-conv-256", 7, 256),
};

export function getBackbone(name: string): Backbone {
  const builder = BUILDERS[name];
  if (!builder) {
    throw new Error(
      `unknown backbone ${name}; available: ${Object.keys(BUILDERS).join(", ")}`
    );
  }
  return builder();
}

export const DEFAULT_BACKBONE = "rp-conv-768";
