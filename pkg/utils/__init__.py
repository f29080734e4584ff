"""Cross-cutting helpers: errors, seeded random streams, telemetry."""
