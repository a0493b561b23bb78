import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from pydantic import ValidationError

from .. import __version__
from ..errors import ConfigError
from ..models.run import ArtifactEntry, RunConfig, RunManifest

MANIFEST_NAME = "manifest.json"


class ManifestTransformer:
    """
    Escritura de artefactos y de su manifiesto.

    Cada artefacto se escribe una sola vez, a través de `write`, y queda
    registrado con su sha256 relativo al directorio de salida.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.out = Path(config.out)
        self.manifest = RunManifest(
            config=config.model_dump(mode="json"),
            tool_version=__version__,
            started_at=datetime.now(timezone.utc),
        )

    @staticmethod
    def digest(path: str | Path) -> str:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()

    @staticmethod
    def prepare_out(out: Path, force: bool) -> None:
        """Crea el directorio de salida; uno con contenido exige `force`"""
        if out.exists() and not out.is_dir():
            raise ConfigError(f"output path {out} exists and is not a directory")
        if out.exists() and any(out.iterdir()) and not force:
            raise ConfigError(f"output directory {out} is not empty; pass --force to overwrite")
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, content: str) -> ArtifactEntry:
        if any(entry.name == name for entry in self.manifest.artifacts):
            raise ConfigError(f"artifact {name} written twice")
        path = self.out / name
        # newline="" conserva los \n tal cual en todas las plataformas
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        entry = ArtifactEntry(name=name, path=name, sha256=self.digest(path))
        self.manifest.artifacts.append(entry)
        return entry

    def finish(self) -> Path:
        self.manifest.finished_at = datetime.now(timezone.utc)
        path = self.out / MANIFEST_NAME
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.manifest.model_dump_json(indent=2) + "\n")
        return path

    @staticmethod
    def load(path: str | Path) -> RunManifest:
        try:
            return RunManifest.model_validate(json.loads(Path(path).read_text(encoding="utf-8-sig")))
        except OSError as e:
            raise ConfigError(f"cannot read manifest {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"manifest {path} is not valid JSON: {e}") from e
        except ValidationError as e:
            raise ConfigError.from_validation(e, str(path)) from e

    @staticmethod
    def verify(manifest: RunManifest, base_dir: str | Path) -> list[str]:
        """Problemas encontrados: artefactos ausentes o con digest distinto"""
        problems = []
        base = Path(base_dir)
        for entry in manifest.artifacts:
            path = base / entry.path
            if not path.exists():
                problems.append(f"{entry.name}: missing")
            elif ManifestTransformer.digest(path) != entry.sha256:
                problems.append(f"{entry.name}: digest mismatch")
        return problems
