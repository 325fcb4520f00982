import { defineConfig } from "vitest/config";

// CPU inference through tfjs dominates test time; give every test room.
export default defineConfig({
  test: {
    testTimeout: 180_000,
    hookTimeout: 180_000,
  },
});
