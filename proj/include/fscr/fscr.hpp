#pragma once

#include "fscr/channel.hpp"
#include "fscr/demod.hpp"
#include "fscr/errors.hpp"
#include "fscr/fft.hpp"
#include "fscr/frontend.hpp"
#include "fscr/io.hpp"
#include "fscr/qam.hpp"
#include "fscr/reconstruct.hpp"
#include "fscr/scenario.hpp"
#include "fscr/tx.hpp"
#include "fscr/waveform.hpp"
