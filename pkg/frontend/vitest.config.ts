import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // the end-to-end test runs the Python solver once in beforeAll
    testTimeout: 180_000,
    hookTimeout: 180_000,
  },
});
