"""Formula generation, verification and refinement loop."""

from .generators import (
    ChatGenerator,
    Expected,
    FormulaPhi,
    FormulaPsi,
    GeneratorError,
    GeneratorRequest,
    Masks,
    ScriptedGenerator,
    SubtaskList,
    extract_block,
    fence,
)
from .pipeline import PipelineResult, build_debug_prompt, run_pipeline, system_prompt
from .specfile import MrbtSpecFile, SubtaskEntry, read_spec, reference_spec, write_spec

__all__ = [
    "ChatGenerator", "Expected", "FormulaPhi", "FormulaPsi", "GeneratorError", "GeneratorRequest", "Masks",
    "MrbtSpecFile", "PipelineResult", "ScriptedGenerator", "SubtaskEntry", "SubtaskList", "build_debug_prompt",
    "extract_block", "fence", "read_spec", "reference_spec", "run_pipeline", "system_prompt", "write_spec",
]
