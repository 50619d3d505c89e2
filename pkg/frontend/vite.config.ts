import { defineConfig } from 'vitest/config';

// /api/* is proxied to the Python inference service in dev; production
// builds expect the same prefix to be routed by whatever serves the bundle.
export default defineConfig({
  server: {
    proxy: {
      '/api': {
        target: process.env.VITE_SERVICE_URL ?? 'http://127.0.0.1:8000',
        changeOrigin: true,
        rewrite: (path) => path.replace(/^\/api/, ''),
      },
    },
  },
  test: {
    environment: 'jsdom',
  },
});
