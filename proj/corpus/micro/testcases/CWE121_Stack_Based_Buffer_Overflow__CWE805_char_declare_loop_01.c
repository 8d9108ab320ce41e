/* Copies 100 bytes into a 50-byte stack buffer with an explicit loop. */
#include "std_testcase.h"

void CWE121_Stack_Based_Buffer_Overflow__CWE805_char_declare_loop_01_bad(void)
{
    char *data;
    char dataBadBuffer[50];
    data = dataBadBuffer;
    data[0] = '\0';
    {
        size_t i;
        char source[100];
        memset(source, 'C', 100-1);
        source[100-1] = '\0';
        for (i = 0; i < 100; i++)
        {
            data[i] = source[i];
        }
        data[100-1] = '\0';
        printLine(data);
    }
}

int main(void)
{
    printLine("Calling bad()...");
    CWE121_Stack_Based_Buffer_Overflow__CWE805_char_declare_loop_01_bad();
    printLine("Finished bad()");
    return 0;
}
