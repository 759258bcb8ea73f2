import numpy as np
import pytest

from mubkit.domain.models import FieldSpecPayload, SuiteKind
from mubkit.errors import InputFileError, InvalidMeasurementError
from mubkit.services.mub import MubSuite
from mubkit.services.recon import CompositeSystem
from mubkit.services.suite import field_from_payload, get_suite_service


def test_service_is_a_cached_singleton():
    service = get_suite_service()
    assert get_suite_service() is service
    assert service.context_for_dimension(5) is service.context_for_dimension(5)


def test_context_kinds():
    service = get_suite_service()
    assert isinstance(service.context_for_dimension(9), MubSuite)
    system = service.context_for_dimension(12)
    assert isinstance(system, CompositeSystem)
    assert system.dims == [4, 3]


@pytest.mark.parametrize("d, kind", [(8, SuiteKind.PRIME_POWER), (6, SuiteKind.COMPOSITE)])
def test_file_context_round_trip(d, kind):
    service = get_suite_service()
    suite_file = service.build_file(d)
    assert suite_file.kind is kind
    context = service.context_from_file(suite_file)
    assert context.d == d
    families = service.families_from_file(suite_file)
    assert len(families) == len(suite_file.families)
    assert all(f.dim == d for f in families)


def test_field_from_payload_rejects_other_modulus():
    with pytest.raises(InputFileError, match="modulus"):
        field_from_payload(FieldSpecPayload(p=2, r=2, modulus=[1, 0, 1]))
    assert field_from_payload(FieldSpecPayload(p=2, r=2, modulus=[1, 1, 1])).order == 4


def test_context_from_file_checks_fields():
    service = get_suite_service()
    suite_file = service.build_file(6)
    suite_file.fields.reverse()
    with pytest.raises(InputFileError):
        service.context_from_file(suite_file)


def test_families_from_file_rejects_invalid_projector():
    service = get_suite_service()
    suite_file = service.build_file(2)
    P = suite_file.families[0].projectors[0]
    P.entries[0] = (0.9, 0.0)
    with pytest.raises(InvalidMeasurementError) as exc:
        service.families_from_file(suite_file)
    assert exc.value.invariant == "idempotent"
    assert np.isfinite(P.entries[0][0])
