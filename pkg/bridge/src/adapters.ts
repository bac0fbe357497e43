/**
 * Adapters expose one classifier behind the worker loop. Anything with the
 * common fit/predict_proba convention can be wrapped via asAdapter.
 */

import * as fs from "node:fs";

export interface Adapter {
  readonly name: string;
  /** Declared class count, or null when it depends on the fitted data. */
  readonly classes: number | null;
  fit(X: number[][], y: number[], seed: number): void;
  predictProba(X: number[][]): number[][];
}

/** Minimal estimator convention shared with mainstream ML toolkits. */
export interface Estimator {
  fit(X: number[][], y: number[], seed?: number): void;
  predictProba(X: number[][]): number[][];
}

/** Reference adapter: wrap any fit/predict_proba estimator. */
export function asAdapter(name: string, estimator: Estimator,
                          classes: number | null = null): Adapter {
  return {
    name,
    classes,
    fit: (X, y, seed) => estimator.fit(X, y, seed),
    predictProba: (X) => estimator.predictProba(X),
  };
}

/** Majority-class adapter: every row gets the training class frequencies. */
export class PriorEstimator implements Estimator {
  private priors: number[] | null = null;

  fit(_X: number[][], y: number[]): void {
    if (y.length === 0) {
      throw new Error("empty training labels");
    }
    const classes = Math.max(...y) + 1;
    const counts = new Array<number>(classes).fill(0);
    for (const label of y) {
      if (!Number.isInteger(label) || label < 0) {
        throw new Error(`invalid label ${label}`);
      }
      counts[label] += 1;
    }
    this.priors = counts.map((c) => c / y.length);
  }

  predictProba(X: number[][]): number[][] {
    if (this.priors === null) {
      throw new Error("not fitted");
    }
    return X.map(() => [...this.priors!]);
  }
}

/** Nearest class-centroid classifier, softmax over negative squared distance. */
export class CentroidEstimator implements Estimator {
  private centroids: number[][] = [];
  private seen: boolean[] = [];

  fit(X: number[][], y: number[]): void {
    if (X.length === 0 || X.length !== y.length) {
      throw new Error("features and labels must be non-empty and aligned");
    }
    const classes = Math.max(...y) + 1;
    const width = X[0].length;
    const sums = Array.from({ length: classes }, () =>
      new Array<number>(width).fill(0));
    const counts = new Array<number>(classes).fill(0);
    for (let i = 0; i < X.length; i++) {
      counts[y[i]] += 1;
      for (let j = 0; j < width; j++) {
        sums[y[i]][j] += X[i][j];
      }
    }
    this.centroids = sums.map((row, c) =>
      counts[c] > 0 ? row.map((v) => v / counts[c]) : row);
    this.seen = counts.map((c) => c > 0);
  }

  predictProba(X: number[][]): number[][] {
    if (this.centroids.length === 0) {
      throw new Error("not fitted");
    }
    return X.map((x) => {
      const logits = this.centroids.map((centroid, c) => {
        if (!this.seen[c]) {
          return -Infinity;
        }
        let d2 = 0;
        for (let j = 0; j < x.length; j++) {
          const diff = x[j] - centroid[j];
          d2 += diff * diff;
        }
        return -d2;
      });
      const m = Math.max(...logits);
      const exps = logits.map((v) => Math.exp(v - m));
      const total = exps.reduce((a, b) => a + b, 0);
      return exps.map((v) => v / total);
    });
  }
}

/** Serves a stored CSV probability matrix; fitting is a no-op. */
export class FixedMatrixEstimator implements Estimator {
  private readonly matrix: number[][];

  constructor(csvPath: string) {
    const text = fs.readFileSync(csvPath, "utf8");
    this.matrix = text
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line.length > 0)
      .map((line) => line.split(",").map(Number));
  }

  fit(): void {
    // stored outputs are the pretrained model
  }

  predictProba(X: number[][]): number[][] {
    if (X.length > this.matrix.length) {
      throw new Error(
        `stored matrix has ${this.matrix.length} rows, query has ${X.length}`);
    }
    return this.matrix.slice(0, X.length);
  }
}

export function buildAdapter(kind: string, options: { matrix?: string;
                                                      name?: string }): Adapter {
  const name = options.name ?? `bridge-${kind}`;
  switch (kind) {
    case "prior":
      return asAdapter(name, new PriorEstimator());
    case "centroid":
      return asAdapter(name, new CentroidEstimator());
    case "fixed": {
      if (!options.matrix) {
        throw new Error("the fixed adapter needs --matrix <csv>");
      }
      return asAdapter(name, new FixedMatrixEstimator(options.matrix));
    }
    default:
      throw new Error(`unknown adapter ${kind}`);
  }
}
