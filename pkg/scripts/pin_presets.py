"""Regenerate tests/preset_digests.json from the current presets."""
import json
from pathlib import Path

from pushcrowd.presets import PRESETS
from pushcrowd.scenario import digest

path = Path(__file__).resolve().parent.parent / "tests" / "preset_digests.json"
pins = {name: digest(make()) for name, make in PRESETS.items()}
path.write_text(json.dumps(pins, indent=2) + "\n")
print(f"wrote {len(pins)} digests to {path}")
