#pragma once

#include "stretch_ranger/error.hpp"
#include "stretch_ranger/units.hpp"
#include "stretch_ranger/sysmodel.hpp"
#include "stretch_ranger/waveform.hpp"
#include "stretch_ranger/stretch.hpp"
#include "stretch_ranger/fft.hpp"
#include "stretch_ranger/mwphotonics.hpp"
#include "stretch_ranger/dsp.hpp"
#include "stretch_ranger/calib.hpp"
#include "stretch_ranger/runner.hpp"
#include "stretch_ranger/io.hpp"

namespace stretch_ranger {
inline constexpr const char* kVersion = "0.3.0";
}
