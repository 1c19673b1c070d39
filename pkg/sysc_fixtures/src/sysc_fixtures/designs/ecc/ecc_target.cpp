#include <systemc>
#include <tlm>
#include <tlm_utils/simple_target_socket.h>

#include "ecc_payload.h"

// Parity unit.  Folds the low 8 or 16 bits of data_in (mode_word selects the
// width), reports the fold on parity_out and flags a mismatch against
// parity_in when check_mode is asserted.
struct ecc_unit : sc_core::sc_module {
    tlm_utils::simple_target_socket<ecc_unit> target_socket;

    SC_CTOR(ecc_unit) : target_socket("target_socket") {
        target_socket.register_b_transport(this, &ecc_unit::b_transport);
    }

    void b_transport(tlm::tlm_generic_payload& trans, sc_core::sc_time& delay) {
        ecc_frame* frame = reinterpret_cast<ecc_frame*>(trans.get_data_ptr());
        if (frame->done == sc_dt::SC_LOGIC_1) {
            frame->done = sc_dt::SC_LOGIC_0;
        }
        if (frame->enable != sc_dt::SC_LOGIC_1) {
            frame->status = 0;
            trans.set_response_status(tlm::TLM_OK_RESPONSE);
            return;
        }
        int width = (frame->mode_word == sc_dt::SC_LOGIC_1) ? 16 : 8;
        bool parity = false;
        for (int i = 0; i < width; ++i) {
            parity ^= frame->data_in[i].to_bool();
        }
        frame->parity_out = parity ? sc_dt::SC_LOGIC_1 : sc_dt::SC_LOGIC_0;
        bool mismatch = false;
        if (frame->check_mode == sc_dt::SC_LOGIC_1) {
            mismatch = (frame->parity_in == sc_dt::SC_LOGIC_1) != parity;
        }
        frame->error_flag = mismatch ? sc_dt::SC_LOGIC_1 : sc_dt::SC_LOGIC_0;
        frame->data_out = frame->data_in;
        sc_dt::sc_bv<8> st;
        st = 0;
        st[0] = (frame->mode_word == sc_dt::SC_LOGIC_1);
        st[1] = (frame->check_mode == sc_dt::SC_LOGIC_1);
        st[2] = mismatch;
        st[3] = parity;
        frame->status = st;
        frame->done = sc_dt::SC_LOGIC_1;
        trans.set_response_status(tlm::TLM_OK_RESPONSE);
    }
};
