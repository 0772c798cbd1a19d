import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Union

from core import constants


class RunManifest:
    """JSON sidecar describing how a results file was produced.

    Lives next to the CSV as ``<name>.meta.json``. The CSV itself stays free
    of timestamps so identical runs give identical bytes; everything that
    varies between runs (creation time, elapsed time) goes here.
    """

    def __init__(self, meta_path: Union[str, Path]):
        self.meta_path = Path(meta_path)
        if not self.meta_path.exists():
            self._create_initial_meta()

    @classmethod
    def for_output(cls, output_path: Union[str, Path]) -> "RunManifest":
        output_path = Path(output_path)
        return cls(output_path.with_name(output_path.stem + constants.MANIFEST_SUFFIX))

    def _create_initial_meta(self):
        initial_data = {
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "version": "",
            "parameter": "",
            "values": [],
            "config": {},
            "elapsed_seconds": 0.0,
            "csv": "",
        }
        self._write_meta(initial_data)

    def _write_meta(self, data: Dict[str, Any]):
        self.meta_path.parent.mkdir(parents=True, exist_ok=True)
        json_string = json.dumps(data, ensure_ascii=False, indent=4)
        self.meta_path.write_text(json_string, encoding='utf-8')

    def read_meta(self) -> Dict[str, Any]:
        return json.loads(self.meta_path.read_text(encoding='utf-8'))

    def update_key(self, key: str, value: Any):
        meta_data = self.read_meta()
        meta_data[key] = value
        self._write_meta(meta_data)

    def update_meta(self, new_data: Dict[str, Any]):
        meta_data = self.read_meta()
        meta_data.update(new_data)
        self._write_meta(meta_data)
