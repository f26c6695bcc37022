import { defineConfig } from "vitest/config";

// every test shells out to the Python CLI, so budgets are generous
export default defineConfig({
  test: {
    testTimeout: 240_000,
    hookTimeout: 60_000,
  },
});
