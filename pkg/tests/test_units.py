import math

import pytest

from app.core.units import db_to_linear, dbm_to_watts, linear_to_db, parse_power, parse_ratio_db, watts_to_dbm


class TestPowerParsing:
    def test_dbm_strings(self):
        assert parse_power("30 dBm") == pytest.approx(1.0)
        assert parse_power("20 dBm") == pytest.approx(0.1)
        assert parse_power("-80dBm") == pytest.approx(1e-11)

    def test_linear_units(self):
        assert parse_power("0.1 W") == pytest.approx(0.1)
        assert parse_power("100 mW") == pytest.approx(0.1)
        assert parse_power(2) == 2.0

    def test_rejects_ratio_units(self):
        with pytest.raises(ValueError):
            parse_power("-40 dB")
        with pytest.raises(ValueError):
            parse_power("loud")


class TestDecibels:
    def test_ratio(self):
        assert parse_ratio_db("-40 dB") == -40.0
        assert db_to_linear(-40.0) == pytest.approx(1e-4)
        with pytest.raises(ValueError):
            parse_ratio_db("3 W")

    def test_round_trip(self):
        assert linear_to_db(db_to_linear(-37.5)) == pytest.approx(-37.5, abs=1e-9)
        assert watts_to_dbm(dbm_to_watts(17.0)) == pytest.approx(17.0, abs=1e-9)

    def test_edges(self):
        assert linear_to_db(0.0) == -math.inf
        assert linear_to_db(math.inf) == math.inf
        assert math.isnan(linear_to_db(-1.0))
