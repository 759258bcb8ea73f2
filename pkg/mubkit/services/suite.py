from typing import Dict, List, Union

import structlog

from mubkit.config import get_settings
from mubkit.domain.models import FamilyPayload, FieldSpecPayload, SuiteFile, SuiteKind
from mubkit.errors import InputFileError, InvalidMeasurementError
from mubkit.services.cmat import matrix_from_payload, matrix_to_payload
from mubkit.services.gf import FieldSpec, factorize, make_field
from mubkit.services.mub import MeasurementFamily, MubSuite, family_from_matrices, mub_suite
from mubkit.services.recon import CompositeSystem, composite_settings, product_family
from mubkit.services.tomo import setting_label_payload

logger = structlog.get_logger()

Context = Union[MubSuite, CompositeSystem]


def field_to_payload(field: FieldSpec) -> FieldSpecPayload:
    return FieldSpecPayload(p=field.p, r=field.r, modulus=list(field.modulus))


def field_from_payload(payload: FieldSpecPayload) -> FieldSpec:
    try:
        field = FieldSpec(p=payload.p, r=payload.r, modulus=tuple(payload.modulus))
    except ValueError as e:
        raise InputFileError(f"invalid field description: {e}") from e
    expected = make_field(payload.p, payload.r)
    if field != expected:
        raise InputFileError(
            f"field F_{field.order} uses modulus {list(field.modulus)}, expected {list(expected.modulus)}"
        )
    return expected


class SuiteService:
    """Builds, caches and (de)serialises measurement suites."""

    def __init__(self):
        self.settings = get_settings()
        self._suites: Dict[FieldSpec, MubSuite] = {}
        self._systems: Dict[int, CompositeSystem] = {}

    def suite(self, field: FieldSpec) -> MubSuite:
        if field not in self._suites:
            self._suites[field] = mub_suite(field)
        return self._suites[field]

    def system(self, d: int) -> CompositeSystem:
        if d not in self._systems:
            self._systems[d] = CompositeSystem.from_dimension(d)
        return self._systems[d]

    def context_for_dimension(self, d: int) -> Context:
        fac = factorize(d)
        if fac.is_prime_power:
            (p, r), = fac.factors
            return self.suite(make_field(p, r))
        return self.system(d)

    # ------------------------------------------------------------------
    # Suite files
    # ------------------------------------------------------------------

    def build_file(self, d: int) -> SuiteFile:
        context = self.context_for_dimension(d)
        if isinstance(context, MubSuite):
            kind = SuiteKind.PRIME_POWER
            fields = [context.field]
            labelled = [(fam.label, fam) for fam in context.families]
        else:
            kind = SuiteKind.COMPOSITE
            fields = context.fields
            labelled = [(s, product_family(context, s)) for s in composite_settings(context)]
        families = [
            FamilyPayload(
                label=setting_label_payload(label),
                projectors=[matrix_to_payload(P) for P in fam.projectors],
            )
            for label, fam in labelled
        ]
        logger.info("Built suite file", d=d, kind=kind.value, families=len(families))
        return SuiteFile(
            format_version=self.settings.FORMAT_VERSION,
            kind=kind,
            d=d,
            fields=[field_to_payload(f) for f in fields],
            families=families,
        )

    def context_from_file(self, suite_file: SuiteFile) -> Context:
        """The field construction a prime-power or composite suite file describes."""
        if suite_file.kind is SuiteKind.CUSTOM:
            raise InputFileError("custom suites carry no field construction to reconstruct with")
        fields = [field_from_payload(f) for f in suite_file.fields]
        if not fields:
            raise InputFileError("suite file lists no fields")
        if suite_file.kind is SuiteKind.PRIME_POWER:
            if len(fields) != 1 or fields[0].order != suite_file.d:
                raise InputFileError(f"prime-power suite for d={suite_file.d} must list exactly the field F_{suite_file.d}")
            return self.suite(fields[0])
        system = CompositeSystem(fields=fields)
        if system.d != suite_file.d or [f.order for f in fields] != factorize(suite_file.d).dims:
            raise InputFileError(f"composite suite fields {system.dims} do not factor d={suite_file.d}")
        return system

    def families_from_file(self, suite_file: SuiteFile) -> List[MeasurementFamily]:
        """Validated families in file order; labels are display names."""
        families = []
        for k, fam in enumerate(suite_file.families):
            name = fam.label if isinstance(fam.label, str) else str(fam.label)
            try:
                family = family_from_matrices(name, [matrix_from_payload(m) for m in fam.projectors])
            except InvalidMeasurementError:
                raise
            except ValueError as e:
                raise InputFileError(f"family {k} ({name}): {e}") from e
            if family.dim != suite_file.d:
                raise InputFileError(f"family {k} ({name}) acts on dimension {family.dim}, suite says {suite_file.d}")
            families.append(family)
        return families


_suite_service: SuiteService | None = None


def get_suite_service():
    global _suite_service
    if _suite_service is None:
        _suite_service = SuiteService()
    return _suite_service


def reset_suite_service():
    global _suite_service
    _suite_service = None
