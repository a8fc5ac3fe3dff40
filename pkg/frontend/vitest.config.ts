import { defineConfig } from "vitest/config";

// Unit tests only; the live end-to-end suite (live/) needs a simulator
// install and runs via `npm run test:live`.
export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
  },
});
