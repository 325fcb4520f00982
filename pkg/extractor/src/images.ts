/**
 * PNG loading and the fixed inference preprocessing.
 *
 * "standard": resize the short side to 256, center-crop 224x224.
 * "cifar": resize straight to 224x224 (for tiny source images).
 * Pixels are scaled to [-1, 1] before the backbone.
 */

import * as fs from "fs";
import * as tf from "@tensorflow/tfjs";
import { PNG } from "pngjs";

export type PreprocessMode = "standard" | "cifar";

export const INPUT_SIZE = 224;

export function loadPng(path: string): tf.Tensor3D {
  const png = PNG.sync.read(fs.readFileSync(path));
  const { width, height, data } = png;
  const rgb = new Float32Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    rgb[3 * i] = data[4 * i];
    rgb[3 * i + 1] = data[4 * i + 1];
    rgb[3 * i + 2] = data[4 * i + 2];
  }
  return tf.tensor3d(rgb, [height, width, 3]);
}

export function preprocess(image: tf.Tensor3D, mode: PreprocessMode): tf.Tensor3D {
  return tf.tidy(() => {
    let out: tf.Tensor3D;
    if (mode === "cifar") {
      out = tf.image.resizeBilinear(image, [INPUT_SIZE, INPUT_SIZE]);
    } else {
      const [h, w] = [image.shape[0], image.shape[1]];
      const scale = 256 / Math.min(h, w);
      const nh = Math.max(INPUT_SIZE, Math.round(h * scale));
      const nw = Math.max(INPUT_SIZE, Math.round(w * scale));
      const resized = tf.image.resizeBilinear(image, [nh, nw]);
      const top = Math.floor((nh - INPUT_SIZE) / 2);
      const left = Math.floor((nw - INPUT_SIZE) / 2);
      out = tf.slice(resized, [top, left, 0], [INPUT_SIZE, INPUT_SIZE, 3]);
    }
    return tf.sub(tf.div(out, 127.5), 1.0);
  });
}

export function loadBatch(paths: string[], mode: PreprocessMode): tf.Tensor4D {
  return tf.tidy(() => {
    const tensors = paths.map((p) => {
      const img = loadPng(p);
      const prepped = preprocess(img, mode);
      img.dispose();
      return prepped;
    });
    return tf.stack(tensors) as tf.Tensor4D;
  });
}
